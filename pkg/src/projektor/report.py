"""Structured check reports shared by the verification suites and the CLI."""

from __future__ import annotations

import json
import time
import zlib
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from . import expr as ex
from .expr import Expr

__all__ = ["CheckEntry", "CheckReport", "identity_entry", "subseed"]

PASS = "pass"
FAIL = "fail"
SKIPPED = "skipped"


def subseed(seed: int, name: str) -> int:
    """Stable per-check seed derived from the suite seed and the check name."""
    return (seed * 1000003 + zlib.crc32(name.encode())) % (2 ** 31)


@dataclass
class CheckEntry:
    name: str
    status: str
    max_residual: float | None = None
    witness: dict = field(default_factory=dict)
    ms: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status != FAIL


@dataclass
class CheckReport:
    suite: str
    seed: int
    entries: list[CheckEntry] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.ok for e in self.entries)

    def entry(self, name: str) -> CheckEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def extend(self, other: "CheckReport"):
        self.entries.extend(other.entries)

    def table(self) -> str:
        """Fixed-width text table.  Wall times are reported only in the JSON
        form so that repeated runs with the same seed are byte-identical."""
        width = max([len(e.name) for e in self.entries] + [8])
        lines = [f"suite: {self.suite} (seed {self.seed})"]
        for e in self.entries:
            res = "-" if e.max_residual is None else f"{e.max_residual:.3e}"
            wit = _witness_str(e.witness)
            lines.append(f"  {e.name:<{width}}  {e.status:<7}  {res:>10}  {wit}")
        n_pass = sum(1 for e in self.entries if e.status == PASS)
        n_skip = sum(1 for e in self.entries if e.status == SKIPPED)
        total = len(self.entries)
        tail = f"{n_pass}/{total - n_skip} passed"
        if n_skip:
            tail += f", {n_skip} skipped"
        lines.append(tail)
        return "\n".join(lines)

    def to_json_dict(self) -> dict:
        return {
            "suite": self.suite,
            "seed": self.seed,
            "results": [
                {
                    "name": e.name,
                    "status": e.status,
                    "max_residual": e.max_residual,
                    "witness": _witness_str(e.witness),
                    "ms": round(e.ms, 3),
                }
                for e in self.entries
            ],
        }

    def write_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")


def _witness_str(witness: Mapping | None) -> str:
    if not witness:
        return ""
    return " ".join(f"{k}={v}" for k, v in sorted(witness.items()))


def identity_entry(name: str, residuals: Iterable[Expr], seed: int,
                   tol: float = 1e-9, n: int = ex.SAMPLE_POINTS,
                   fixed: Mapping[str, object] | None = None) -> CheckEntry:
    """Check that every residual expression vanishes (symbolically or at
    seeded sample points) and wrap the verdict in a CheckEntry."""
    t0 = time.perf_counter()
    try:
        worst, witness = ex.max_residual(list(residuals),
                                         seed=subseed(seed, name),
                                         n=n, fixed=fixed)
        status = PASS if worst <= tol else FAIL
        entry = CheckEntry(name, status, worst,
                           witness if status == FAIL else {})
    except ex.SamplingExhausted as err:
        entry = CheckEntry(name, FAIL, None, {"error": str(err)})
    entry.ms = (time.perf_counter() - t0) * 1000.0
    return entry

"""Charts, indexed tensor fields, metric algebra and coordinate maps.

Components are stored densely (dimensions here are at most 5) in row-major
order over the index tuple.  Tensor fields are immutable values; declared
symmetries are verified, not exploited for storage.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import sympy as sp

from . import expr as ex
from .errors import (ChartMismatch, MapError, SignatureMismatch, SingularMetric,
                     SlotError)
from .expr import Bindings, CoordinateSymbol, Expr

__all__ = [
    "Chart", "TensorField", "Metric", "CoordinateMap",
    "contract", "transpose", "raise_index", "lower_index", "tensor_product",
    "add", "negate", "scale", "transform", "kronecker", "random_tensor_field",
]

UP = "up"
DOWN = "down"


@dataclass(frozen=True)
class Chart:
    """Named coordinate system: dimension plus distinct coordinate symbols."""

    name: str
    coords: tuple[Expr, ...]

    def __post_init__(self):
        if len(self.coords) < 1:
            raise ValueError("chart needs at least one coordinate")
        for c in self.coords:
            if not isinstance(c.sym, CoordinateSymbol):
                raise ValueError(f"{c} is not a coordinate symbol")
        names = [c.sym.name for c in self.coords]
        if len(set(names)) != len(names):
            raise ValueError("coordinate symbols must be distinct")

    @classmethod
    def of(cls, name: str, coord_names: Sequence[str]) -> "Chart":
        return cls(name, tuple(ex.coordinate(c) for c in coord_names))

    @property
    def dim(self) -> int:
        return len(self.coords)

    def coord_names(self) -> tuple[str, ...]:
        return tuple(c.sym.name for c in self.coords)


def _same_expr(a: Expr, b: Expr) -> bool:
    if a.sym == b.sym:
        return True
    try:
        return sp.cancel(sp.together(a.sym - b.sym)) == 0
    except (sp.PolynomialError, NotImplementedError):
        return False


@dataclass(frozen=True)
class TensorField:
    """Dense component array on a chart with a fixed variance signature."""

    chart: Chart
    variance: tuple[str, ...]
    comps: tuple[Expr, ...]
    symmetries: tuple[tuple[int, int, str], ...] = ()

    def __post_init__(self):
        n = self.chart.dim ** self.rank
        if len(self.comps) != n:
            raise ValueError(f"expected {n} components, got {len(self.comps)}")
        for s in self.variance:
            if s not in (UP, DOWN):
                raise ValueError(f"bad variance entry {s!r}")
        for i, j, kind in self.symmetries:
            if kind not in ("symmetric", "antisymmetric"):
                raise ValueError(f"bad symmetry kind {kind!r}")
            if not (0 <= i < self.rank and 0 <= j < self.rank and i != j):
                raise SlotError(f"symmetry slots ({i}, {j}) out of range")
            if self.variance[i] != self.variance[j]:
                raise SlotError("symmetry declared across mixed variance")
            sign = 1 if kind == "symmetric" else -1
            for idx in self.indices():
                if idx[i] > idx[j]:
                    continue
                swapped = list(idx)
                swapped[i], swapped[j] = swapped[j], swapped[i]
                a = self[idx]
                b = self[tuple(swapped)]
                if not _same_expr(a, sign * b if sign < 0 else b):
                    raise ValueError(
                        f"declared {kind} symmetry fails at {idx}")

    @property
    def rank(self) -> int:
        return len(self.variance)

    @property
    def dim(self) -> int:
        return self.chart.dim

    def indices(self) -> Iterable[tuple[int, ...]]:
        return itertools.product(range(self.dim), repeat=self.rank)

    def _flat(self, idx: tuple[int, ...]) -> int:
        out = 0
        for i in idx:
            if not 0 <= i < self.dim:
                raise IndexError(f"index {i} out of range")
            out = out * self.dim + i
        return out

    def __getitem__(self, idx) -> Expr:
        if isinstance(idx, int):
            idx = (idx,)
        if len(idx) != self.rank:
            raise IndexError(f"rank {self.rank} tensor takes {self.rank} indices")
        return self.comps[self._flat(tuple(idx))]

    @classmethod
    def from_function(cls, chart: Chart, variance: Sequence[str],
                      fn: Callable[[tuple[int, ...]], Expr],
                      symmetries=()) -> "TensorField":
        variance = tuple(variance)
        dim = chart.dim
        comps = tuple(fn(idx) for idx in
                      itertools.product(range(dim), repeat=len(variance)))
        return cls(chart, variance, comps, tuple(symmetries))

    @classmethod
    def scalar(cls, chart: Chart, value: Expr) -> "TensorField":
        return cls(chart, (), (value,))

    @classmethod
    def zeros(cls, chart: Chart, variance: Sequence[str]) -> "TensorField":
        zero = ex.integer(0)
        return cls.from_function(chart, variance, lambda idx: zero)

    def map_components(self, fn: Callable[[Expr], Expr],
                       keep_symmetries: bool = True) -> "TensorField":
        return TensorField(self.chart, self.variance,
                           tuple(fn(c) for c in self.comps),
                           self.symmetries if keep_symmetries else ())

    def simplified(self) -> "TensorField":
        return self.map_components(ex.simplify)

    def is_zero(self) -> bool:
        return all(ex.simplify(c).is_zero() for c in self.comps)


def _check_chart(a: TensorField, b: TensorField):
    if a.chart != b.chart:
        raise ChartMismatch(f"{a.chart.name} vs {b.chart.name}")


def add(a: TensorField, b: TensorField) -> TensorField:
    _check_chart(a, b)
    if a.variance != b.variance:
        raise SignatureMismatch(f"{a.variance} vs {b.variance}")
    comps = tuple(x + y for x, y in zip(a.comps, b.comps))
    common = tuple(s for s in a.symmetries if s in b.symmetries)
    return TensorField(a.chart, a.variance, comps, common)


def negate(a: TensorField) -> TensorField:
    return a.map_components(lambda c: -c)


def scale(k: Expr, a: TensorField) -> TensorField:
    return a.map_components(lambda c: k * c)


def tensor_product(a: TensorField, b: TensorField) -> TensorField:
    _check_chart(a, b)
    variance = a.variance + b.variance
    dim = a.dim

    def fn(idx):
        return a[idx[:a.rank]] * b[idx[a.rank:]]

    syms = a.symmetries + tuple(
        (i + a.rank, j + a.rank, kind) for i, j, kind in b.symmetries)
    return TensorField.from_function(a.chart, variance, fn, syms)


def transpose(t: TensorField, perm: Sequence[int]) -> TensorField:
    """Reorder slots; ``perm[i]`` is the source slot for new slot ``i``."""
    perm = tuple(perm)
    if sorted(perm) != list(range(t.rank)):
        raise SlotError(f"bad permutation {perm} for rank {t.rank}")
    variance = tuple(t.variance[p] for p in perm)
    inv = {p: i for i, p in enumerate(perm)}

    def fn(idx):
        return t[tuple(idx[inv[s]] for s in range(t.rank))]

    syms = tuple((inv[i], inv[j], kind) for i, j, kind in t.symmetries)
    return TensorField.from_function(t.chart, variance, fn, syms)


def contract(t: TensorField, up_slot: int, down_slot: int) -> TensorField:
    """Trace over one up and one down slot."""
    if not (0 <= up_slot < t.rank) or t.variance[up_slot] != UP:
        raise SlotError(f"slot {up_slot} is not an up slot")
    if not (0 <= down_slot < t.rank) or t.variance[down_slot] != DOWN:
        raise SlotError(f"slot {down_slot} is not a down slot")
    removed = sorted((up_slot, down_slot))
    keep = [s for s in range(t.rank) if s not in removed]
    variance = tuple(t.variance[s] for s in keep)

    def fn(idx):
        total = ex.integer(0)
        for k in range(t.dim):
            full = [0] * t.rank
            for pos, s in enumerate(keep):
                full[s] = idx[pos]
            full[up_slot] = k
            full[down_slot] = k
            total = total + t[tuple(full)]
        return total

    remap = {s: pos for pos, s in enumerate(keep)}
    syms = tuple((remap[i], remap[j], kind) for i, j, kind in t.symmetries
                 if i in remap and j in remap)
    return TensorField.from_function(t.chart, variance, fn, syms)


class Metric:
    """Symmetric (down, down) tensor with cached inverse and determinant."""

    def __init__(self, field_or_rows, chart: Chart | None = None,
                 inverse_rows=None, determinant: Expr | None = None):
        if isinstance(field_or_rows, TensorField):
            f = field_or_rows
        else:
            rows = [list(r) for r in field_or_rows]
            if chart is None:
                raise ValueError("chart required when passing raw rows")
            f = TensorField(chart, (DOWN, DOWN),
                            tuple(e for row in rows for e in row),
                            ((0, 1, "symmetric"),))
        if f.variance != (DOWN, DOWN):
            raise SignatureMismatch("metric must be (down, down)")
        if not any(s[:2] in ((0, 1), (1, 0)) and s[2] == "symmetric"
                   for s in f.symmetries):
            f = TensorField(f.chart, f.variance, f.comps,
                            f.symmetries + ((0, 1, "symmetric"),))
        self.field = f
        self.chart = f.chart
        self.dim = f.dim
        self._inverse_rows = None
        self._det = None
        self._cache: dict = {}
        if determinant is not None:
            self._det = ex.simplify(determinant)
        if inverse_rows is not None:
            rows = [[ex.simplify(e) for e in r] for r in inverse_rows]
            self._verify_inverse(rows)
            self._inverse_rows = rows

    def component(self, i: int, j: int) -> Expr:
        return self.field[i, j]

    def matrix(self) -> sp.Matrix:
        return sp.Matrix(self.dim, self.dim,
                         lambda i, j: self.field[i, j].sym)

    @property
    def determinant(self) -> Expr:
        if self._det is None:
            det = sp.cancel(sp.together(self.matrix().det(method="berkowitz")))
            if det == 0:
                raise SingularMetric(f"metric on {self.chart.name} is singular")
            self._det = Expr(det)
        return self._det

    def _compute_inverse(self):
        if self._inverse_rows is None:
            _ = self.determinant
            try:
                inv = self.matrix().inv(method="ADJ")
            except (ValueError, sp.matrices.exceptions.NonInvertibleMatrixError) as err:
                raise SingularMetric(str(err)) from None
            self._inverse_rows = [
                [Expr(sp.cancel(sp.together(inv[i, j]))) for j in range(self.dim)]
                for i in range(self.dim)]
        return self._inverse_rows

    def _verify_inverse(self, rows):
        for i in range(self.dim):
            for j in range(self.dim):
                s = sp.Integer(0)
                for k in range(self.dim):
                    s += self.field[i, k].sym * rows[k][j].sym
                if sp.cancel(sp.together(s - (1 if i == j else 0))) != 0:
                    raise SingularMetric(
                        f"preset inverse fails at ({i}, {j})")

    def inverse_component(self, i: int, j: int) -> Expr:
        return self._compute_inverse()[i][j]

    @property
    def inverse_field(self) -> TensorField:
        rows = self._compute_inverse()
        return TensorField(self.chart, (UP, UP),
                           tuple(e for row in rows for e in row),
                           ((0, 1, "symmetric"),))


def raise_index(t: TensorField, slot: int, m: Metric) -> TensorField:
    if not (0 <= slot < t.rank) or t.variance[slot] != DOWN:
        raise SlotError(f"slot {slot} is not a down slot")
    _check_chart(t, m.field)
    variance = tuple(UP if s == slot else v for s, v in enumerate(t.variance))

    def fn(idx):
        total = ex.integer(0)
        for k in range(t.dim):
            src = list(idx)
            src[slot] = k
            total = total + m.inverse_component(idx[slot], k) * t[tuple(src)]
        return ex.simplify(total)

    syms = tuple(s for s in t.symmetries if slot not in s[:2])
    return TensorField.from_function(t.chart, variance, fn, syms)


def lower_index(t: TensorField, slot: int, m: Metric) -> TensorField:
    if not (0 <= slot < t.rank) or t.variance[slot] != UP:
        raise SlotError(f"slot {slot} is not an up slot")
    _check_chart(t, m.field)
    variance = tuple(DOWN if s == slot else v for s, v in enumerate(t.variance))

    def fn(idx):
        total = ex.integer(0)
        for k in range(t.dim):
            src = list(idx)
            src[slot] = k
            total = total + m.component(idx[slot], k) * t[tuple(src)]
        return ex.simplify(total)

    syms = tuple(s for s in t.symmetries if slot not in s[:2])
    return TensorField.from_function(t.chart, variance, fn, syms)


def kronecker(chart: Chart) -> TensorField:
    one, zero = ex.integer(1), ex.integer(0)
    return TensorField.from_function(
        chart, (UP, DOWN), lambda idx: one if idx[0] == idx[1] else zero)


# ---------------------------------------------------------------------
# Coordinate maps
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class CoordinateMap:
    """Invertible change of coordinates between two charts.

    `old_in_new` expresses the old coordinates as expressions in the new
    chart's symbols (always required).  `new_in_old` is the forward map; it
    may be omitted when no closed form exists in the expression language, in
    which case forward Jacobians come from symbolic matrix inversion.
    """

    old_chart: Chart
    new_chart: Chart
    old_in_new: tuple[Expr, ...]
    new_in_old: tuple[Expr, ...] | None = None

    def __post_init__(self):
        if len(self.old_in_new) != self.old_chart.dim:
            raise MapError("old_in_new must give every old coordinate")
        if self.new_in_old is not None and \
                len(self.new_in_old) != self.new_chart.dim:
            raise MapError("new_in_old must give every new coordinate")
        if self.old_chart.dim != self.new_chart.dim:
            raise MapError("coordinate maps must preserve dimension")

    @classmethod
    def identity(cls, chart: Chart) -> "CoordinateMap":
        return cls(chart, chart, chart.coords, chart.coords)

    def jacobian(self) -> list[list[Expr]]:
        """d(old^a)/d(new^b), expressions in the new coordinates."""
        return [[ex.diff(f, c) for c in self.new_chart.coords]
                for f in self.old_in_new]

    def inverse_jacobian(self) -> list[list[Expr]]:
        """d(new^a)/d(old^b) expressed in the new coordinates."""
        dim = self.new_chart.dim
        m = sp.Matrix(dim, dim, lambda i, j: self.jacobian()[i][j].sym)
        try:
            inv = m.inv(method="ADJ")
        except (ValueError, sp.matrices.exceptions.NonInvertibleMatrixError) as err:
            raise MapError(f"map Jacobian is singular: {err}") from None
        return [[Expr(sp.cancel(sp.together(inv[i, j]))) for j in range(dim)]
                for i in range(dim)]

    def substitute(self, e: Expr) -> Expr:
        """Rewrite an expression in old coordinates as one in new coordinates."""
        table = dict(zip(self.old_chart.coords, self.old_in_new))
        return e.subs(table)

    def verify(self, seed: int = 0, n: int = 6, tol: float = 1e-9):
        """Sample check: maps mutually inverse (when both given) and the
        Jacobian invertible.  Raises MapError on failure."""
        det = sp.Matrix(len(self.old_in_new), len(self.old_in_new),
                        lambda i, j: self.jacobian()[i][j].sym).det()
        det_e = Expr(sp.cancel(sp.together(det)))
        if det_e.is_zero():
            raise MapError("map Jacobian is singular")
        names = set()
        for f in self.old_in_new:
            names |= f.free_symbols()
        names |= set(self.new_chart.coord_names())

        def reject(b):
            for f in self.old_in_new:
                ex._eval_loose(f, b)
            ex._eval_loose(det_e, b)
            v = ex._eval_loose(det_e, b)
            mag = abs(v) if isinstance(v, Fraction) else abs(v)
            if float(mag) < 1e-8:
                raise ex._NearPole

        points = ex.sample_points(names, seed, n, reject=reject)
        if self.new_in_old is None:
            return
        for b in points:
            old_vals = {name: ex._eval_loose(f, b) for name, f in
                        zip(self.old_chart.coord_names(), self.old_in_new)}
            env = Bindings({k: v for k, v in b.items()
                            if k not in self.new_chart.coord_names()})
            for k, v in old_vals.items():
                env[k] = v
            for name, g in zip(self.new_chart.coord_names(), self.new_in_old):
                got = ex._eval_loose(g, env)
                want = b[name]
                gf, wf = ex._to_mpf(got), ex._to_mpf(want)
                if abs(gf - wf) > tol * max(1.0, abs(wf)):
                    raise MapError(
                        f"maps are not mutually inverse at {dict(b)} "
                        f"({name}: {gf} != {wf})")


def transform(t: TensorField, cmap: CoordinateMap, seed: int = 0) -> TensorField:
    """Standard Jacobian transformation law, slot by slot."""
    if t.chart != cmap.old_chart:
        raise ChartMismatch(
            f"tensor lives on {t.chart.name}, map starts at {cmap.old_chart.name}")
    cmap.verify(seed=seed)
    dim = t.dim
    jac = cmap.jacobian()
    inv_needed = UP in t.variance
    inv = cmap.inverse_jacobian() if inv_needed else None

    moved = {idx: cmap.substitute(t[idx]) for idx in t.indices()}

    def fn(new_idx):
        total = sp.Integer(0)
        for old_idx in itertools.product(range(dim), repeat=t.rank):
            factor = sp.Integer(1)
            for s in range(t.rank):
                if t.variance[s] == DOWN:
                    factor *= jac[old_idx[s]][new_idx[s]].sym
                else:
                    factor *= inv[new_idx[s]][old_idx[s]].sym
                if factor == 0:
                    break
            if factor == 0:
                continue
            total += factor * moved[old_idx].sym
        return ex.simplify(Expr(total))

    out = TensorField.from_function(cmap.new_chart, t.variance, fn)
    return out


def random_tensor_field(chart: Chart, variance: Sequence[str],
                        rng: random.Random, terms: int = 2,
                        degree: int = 2) -> TensorField:
    """Seeded random polynomial field, handy for identity spot checks."""
    coords = chart.coords

    def poly():
        e = ex.rational(rng.randint(-4, 4), rng.randint(1, 3))
        for _ in range(terms):
            c = ex.rational(rng.randint(-3, 3), rng.randint(1, 4))
            mono = c
            for _ in range(rng.randint(1, degree)):
                mono = mono * coords[rng.randrange(len(coords))]
            e = e + mono
        return e

    return TensorField.from_function(chart, tuple(variance),
                                     lambda idx: poly())

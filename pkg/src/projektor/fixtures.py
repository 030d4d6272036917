"""Bundled model manifests and builders for the standard fixture zoo.

The manifests shipped under ``projektor/manifests`` are the single source
of truth; everything here goes through the manifest parser, so the fixture
zoo doubles as an end-to-end exercise of the text front end.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

from . import expr as ex
from . import tensor as tn
from .errors import ValidationError
from .expr import Expr
from .parser import ModelSpec, parse_manifest
from .projective import FiveModel, build_adapted_fivemodel
from .tensor import Chart, Metric, TensorField

__all__ = [
    "Model", "manifest_path", "manifest_names", "load_model", "build_model",
    "flat4", "sphere2", "schwarzschild", "reissner_nordstrom", "variable_j",
    "five_model_from",
]


@dataclass
class Model:
    """A parsed manifest assembled into runtime objects."""

    spec: ModelSpec
    chart: Chart
    metric: Metric
    potential: TensorField | None
    j_scalar: Expr | None
    chi: Expr | None
    constants: dict[str, Fraction | None]

    @property
    def name(self) -> str:
        return self.spec.name

    def fixed_constants(self) -> dict[str, Fraction]:
        """Constants the manifest pins to numeric values."""
        return {k: v for k, v in self.constants.items() if v is not None}


def manifest_names() -> list[str]:
    root = resources.files("projektor") / "manifests"
    return sorted(p.name[:-5] for p in root.iterdir()
                  if p.name.endswith(".toml"))


def manifest_path(name: str) -> Path:
    """Filesystem path of a bundled manifest (without the .toml suffix)."""
    p = resources.files("projektor") / "manifests" / f"{name}.toml"
    if not p.is_file():
        raise FileNotFoundError(f"no bundled manifest named {name!r}")
    return Path(str(p))


def build_model(spec: ModelSpec) -> Model:
    chart = Chart.of(spec.name, spec.coords)
    rows = [[spec.metric[i][j] for j in range(spec.dim)]
            for i in range(spec.dim)]
    metric = Metric(rows, chart)
    potential = None
    if spec.potential is not None:
        potential = TensorField(chart, (tn.DOWN,), tuple(spec.potential))
    return Model(spec=spec, chart=chart, metric=metric, potential=potential,
                 j_scalar=spec.scalars.get("J"), chi=spec.scalars.get("chi"),
                 constants=dict(spec.constants))


def load_model(source: str | Path) -> Model:
    """Build a model from a manifest path or raw manifest text."""
    text = source
    if isinstance(source, Path) or (isinstance(source, str)
                                    and "\n" not in source):
        text = Path(source).read_text(encoding="utf-8")
    return build_model(parse_manifest(text))


def _bundled(name: str) -> Model:
    return load_model(manifest_path(name))


def flat4() -> Model:
    return _bundled("flat4")


def sphere2() -> Model:
    return _bundled("sphere2")


def schwarzschild() -> Model:
    return _bundled("schwarzschild")


def reissner_nordstrom() -> Model:
    return _bundled("reissner")


def variable_j() -> Model:
    return _bundled("variable_j")


def five_model_from(model: Model) -> FiveModel:
    """Adapted five-dimensional model of a manifest that declares J."""
    if model.j_scalar is None:
        raise ValidationError(
            f"manifest {model.name!r} declares no scalar J")
    phi = model.potential
    if phi is None:
        zero = ex.integer(0)
        phi = TensorField(model.chart, (tn.DOWN,),
                          tuple(zero for _ in range(model.chart.dim)))
    return build_adapted_fivemodel(model.metric, phi, model.j_scalar)

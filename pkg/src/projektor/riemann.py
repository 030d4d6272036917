"""Connection coefficients, covariant differentiation, curvature, transport.

Two independent routes to the covariant derivative are provided: the
3-index coefficient formula (`covariant_derivative`) and the pointwise
construction through coordinates in which the metric is flat to first
order at a point (`plane_route_derivative_at`).  The verification suites
cross-check them.

Curvature sign conventions are pinned by two requirements: the rank-4
tensor satisfies the commutator relation

    a_{k||l||j} - a_{k||j||l} = -G^m_{.klj} a_m

for every covector field, and the Ricci contraction makes the unit
2-sphere scalar curvature +2.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import sympy as sp

from . import expr as ex
from . import tensor as tn
from .errors import ChartMismatch, DomainError, SingularMetric
from .expr import Bindings, Expr
from .report import CheckEntry, CheckReport, identity_entry, subseed
from .tensor import (Chart, CoordinateMap, Metric, TensorField, add, contract,
                     negate, tensor_product, transform, transpose)

__all__ = [
    "ConnectionCoeffs", "christoffel", "covariant_derivative",
    "verify_axioms", "riemann_tensor", "ricci", "scalar_curvature",
    "plane_coordinates_at", "plane_route_derivative_at",
    "CurveSpec", "TransportResult", "parallel_transport",
    "veblen_projective_connection", "gamma_phi_shift",
]


@dataclass(frozen=True)
class ConnectionCoeffs:
    """3-index coefficients C^m_{jr}, symmetric in the lower pair."""

    chart: Chart
    comps: tuple[Expr, ...]

    def __post_init__(self):
        dim = self.chart.dim
        if len(self.comps) != dim ** 3:
            raise ValueError("component count must be dim^3")
        for m, j, r in itertools.product(range(dim), repeat=3):
            if j < r and not tn._same_expr(self[m, j, r], self[m, r, j]):
                raise ValueError(
                    f"coefficients not symmetric in lower pair at {(m, j, r)}")

    @property
    def dim(self) -> int:
        return self.chart.dim

    def __getitem__(self, idx) -> Expr:
        m, j, r = idx
        d = self.dim
        return self.comps[(m * d + j) * d + r]

    @classmethod
    def from_function(cls, chart: Chart, fn) -> "ConnectionCoeffs":
        dim = chart.dim
        comps = []
        for m in range(dim):
            for j in range(dim):
                for r in range(dim):
                    if r < j:
                        comps.append(comps[(m * dim + r) * dim + j])
                    else:
                        comps.append(fn(m, j, r))
        return cls(chart, tuple(comps))

    def nonzero(self):
        for idx in itertools.product(range(self.dim), repeat=3):
            e = self[idx]
            if not e.is_zero():
                yield idx, e


def christoffel(m: Metric) -> ConnectionCoeffs:
    """Levi-Civita coefficients of the metric (cached on the metric)."""
    if "christoffel" in m._cache:
        return m._cache["christoffel"]
    _ = m.determinant  # raises SingularMetric early
    chart = m.chart
    coords = chart.coords
    dim = chart.dim
    dg = [[[ex.diff(m.component(h, j), coords[r]) for r in range(dim)]
           for j in range(dim)] for h in range(dim)]

    def fn(mm, j, r):
        total = sp.Integer(0)
        for h in range(dim):
            ginv = m.inverse_component(mm, h).sym
            if ginv == 0:
                continue
            total += ginv * (dg[h][j][r].sym + dg[h][r][j].sym
                             - dg[j][r][h].sym)
        return ex.simplify(Expr(sp.Rational(1, 2) * total))

    out = ConnectionCoeffs.from_function(chart, fn)
    m._cache["christoffel"] = out
    return out


def covariant_derivative(t: TensorField, m: Metric,
                         connection: ConnectionCoeffs | None = None
                         ) -> TensorField:
    """Coefficient-formula covariant derivative; one down slot appended."""
    if t.chart != m.chart:
        raise ChartMismatch(
            f"field on {t.chart.name}, metric on {m.chart.name}")
    gamma = connection if connection is not None else christoffel(m)
    coords = t.chart.coords
    dim = t.dim

    def fn(idx):
        src, k = idx[:-1], idx[-1]
        total = ex.diff(t[src], coords[k]).sym
        for s, var in enumerate(t.variance):
            for l in range(dim):
                moved = list(src)
                moved[s] = l
                if var == tn.UP:
                    g = gamma[src[s], l, k]
                else:
                    g = gamma[l, src[s], k]
                if g.is_zero():
                    continue
                term = g.sym * t[tuple(moved)].sym
                total = total + term if var == tn.UP else total - term
        return Expr(total)

    variance = t.variance + (tn.DOWN,)
    syms = t.symmetries  # untouched slots keep their declarations
    return TensorField.from_function(t.chart, variance, fn, syms)


def _gradient(t: TensorField) -> TensorField:
    coords = t.chart.coords
    return TensorField.from_function(
        t.chart, t.variance + (tn.DOWN,),
        lambda idx: ex.diff(t[idx[:-1]], coords[idx[-1]]))


def _residuals(a: TensorField, b: TensorField) -> list[Expr]:
    return [a[idx] - b[idx] for idx in a.indices()]


def verify_axioms(m: Metric, fields: dict | None = None, seed: int = 0,
                  connection: ConnectionCoeffs | None = None) -> CheckReport:
    """Check the five defining properties of covariant differentiation.

    `fields` may supply sample fields (keys: scalar, covector, vector,
    mixed); missing ones are generated from the seed.  `connection` lets
    tests swap in a deliberately broken operator.
    """
    import random
    rng = random.Random(subseed(seed, "axiom-fields"))
    fields = dict(fields or {})
    chart = m.chart
    fields.setdefault("scalar", tn.random_tensor_field(chart, (), rng))
    fields.setdefault("covector", tn.random_tensor_field(chart, (tn.DOWN,), rng))
    fields.setdefault("covector2", tn.random_tensor_field(chart, (tn.DOWN,), rng))
    fields.setdefault("vector", tn.random_tensor_field(chart, (tn.UP,), rng))
    fields.setdefault("mixed", tn.random_tensor_field(chart, (tn.UP, tn.DOWN), rng))

    def nabla(t):
        return covariant_derivative(t, m, connection=connection)

    report = CheckReport("axioms", seed)
    a, b = fields["covector"], fields["covector2"]
    v, T = fields["vector"], fields["mixed"]
    phi = fields["scalar"]

    res = _residuals(nabla(add(a, b)), add(nabla(a), nabla(b)))
    prod = tensor_product(v, a)
    lhs = nabla(prod)
    rhs = add(transpose(tensor_product(nabla(v), a), (0, 2, 1)),
              tensor_product(v, nabla(a)))
    res += _residuals(lhs, rhs)
    report.entries.append(identity_entry("I_sum_product_rules", res, seed))

    lhs = contract(nabla(T), 0, 1)
    rhs = nabla(contract(T, 0, 1))
    report.entries.append(identity_entry(
        "II_commutes_with_contraction", _residuals(lhs, rhs), seed))

    report.entries.append(identity_entry(
        "III_metric_compatibility",
        [c for c in nabla(m.field).comps], seed))

    report.entries.append(identity_entry(
        "IV_scalar_gradient", _residuals(nabla(phi), _gradient(phi)), seed))

    da = nabla(a)
    pa = _gradient(a)
    res = [(da[k, j] - da[j, k]) - (pa[k, j] - pa[j, k])
           for k in range(chart.dim) for j in range(chart.dim) if k < j]
    report.entries.append(identity_entry("V_rotation", res, seed))
    return report


def riemann_tensor(m: Metric) -> TensorField:
    """Rank-4 curvature tensor G^m_{.klj} (cached on the metric)."""
    if "riemann" in m._cache:
        return m._cache["riemann"]
    gamma = christoffel(m)
    chart = m.chart
    coords = chart.coords
    dim = chart.dim
    dgamma = {}

    def dG(mm, k, l, j):
        key = (mm, k, l, j)
        if key not in dgamma:
            dgamma[key] = ex.diff(gamma[mm, k, l], coords[j])
        return dgamma[key]

    store: dict[tuple, Expr] = {}
    zero = ex.integer(0)
    for mm, k in itertools.product(range(dim), repeat=2):
        for l in range(dim):
            for j in range(l, dim):
                if l == j:
                    store[(mm, k, l, j)] = zero
                    continue
                total = dG(mm, k, l, j).sym - dG(mm, k, j, l).sym
                for h in range(dim):
                    total += (gamma[h, k, l].sym * gamma[mm, h, j].sym
                              - gamma[h, k, j].sym * gamma[mm, h, l].sym)
                e = ex.simplify(Expr(total))
                store[(mm, k, l, j)] = e
                store[(mm, k, j, l)] = -e

    comps = tuple(store[idx]
                  for idx in itertools.product(range(dim), repeat=4))
    out = TensorField(chart, (tn.UP, tn.DOWN, tn.DOWN, tn.DOWN), comps,
                      ((2, 3, "antisymmetric"),))
    m._cache["riemann"] = out
    return out


def ricci(m: Metric) -> TensorField:
    """Contraction of the curvature tensor over its first and last slots
    (flat space gives zero, the unit 2-sphere a positive tensor)."""
    if "ricci" in m._cache:
        return m._cache["ricci"]
    out = contract(riemann_tensor(m), 0, 3).map_components(ex.simplify)
    m._cache["ricci"] = out
    return out


def scalar_curvature(m: Metric) -> Expr:
    if "scalar" in m._cache:
        return m._cache["scalar"]
    ric = ricci(m)
    total = sp.Integer(0)
    for k, l in itertools.product(range(m.dim), repeat=2):
        total += m.inverse_component(k, l).sym * ric[k, l].sym
    out = ex.simplify(Expr(total))
    m._cache["scalar"] = out
    return out


# ---------------------------------------------------------------------
# Plane coordinates at a point
# ---------------------------------------------------------------------

def _point_subs(chart: Chart, point: Bindings) -> dict:
    table = {}
    for c in chart.coords:
        name = c.sym.name
        if name not in point:
            raise ValueError(f"point must bind coordinate {name}")
        v = point[name]
        if not isinstance(v, Fraction):
            raise ValueError("plane construction wants exact rational points")
        table[c.sym] = sp.Rational(v.numerator, v.denominator)
    for name, v in point.items():
        if name in (c.sym.name for c in chart.coords):
            continue
        if isinstance(v, Fraction):
            table[sp.Symbol(name)] = sp.Rational(v.numerator,
                                                            v.denominator)
    return table


def plane_coordinates_at(m: Metric, point: Bindings) -> CoordinateMap:
    """Quadratic coordinate change after which the metric has vanishing
    first partials at the given point (which maps to the origin)."""
    table = _point_subs(m.chart, point)
    det_at = ex.simplify(Expr(m.determinant.sym.subs(table)))
    det_val = ex._eval_loose(det_at, Bindings())
    if abs(ex._to_mpf(det_val)) < 1e-12:
        raise SingularMetric("metric is singular at the requested point")
    gamma = christoffel(m)
    new_chart = Chart.of(m.chart.name + "_plane",
                         [n + "_b" for n in m.chart.coord_names()])
    xb = new_chart.coords
    dim = m.dim
    old_in_new = []
    for k in range(dim):
        e = Expr(table[m.chart.coords[k].sym]) + xb[k]
        for l, j in itertools.product(range(dim), repeat=2):
            gval = Expr(gamma[k, l, j].sym.subs(table))
            if gval.is_zero():
                continue
            e = e - ex.rational(1, 2) * gval * xb[l] * xb[j]
        old_in_new.append(ex.simplify(e))
    return CoordinateMap(m.chart, new_chart, tuple(old_in_new))


def plane_route_derivative_at(t: TensorField, m: Metric, point: Bindings
                              ) -> dict[tuple[int, ...], mpmath.mpf]:
    """Covariant derivative at one point via the plane-coordinate route:
    transform, take plain partials, read off at the image of the point.

    The transformation back to the original chart is the identity there
    because the plane map's Jacobian is one at the point.
    """
    cmap = plane_coordinates_at(m, point)
    tbar = transform(t, cmap)
    origin = Bindings({n: Fraction(0) for n in cmap.new_chart.coord_names()})
    for name, v in point.items():
        if name not in m.chart.coord_names():
            origin[name] = v
    out = {}
    for idx in tbar.indices():
        for k in range(m.dim):
            d = ex.diff(tbar[idx], cmap.new_chart.coords[k])
            out[idx + (k,)] = ex._to_mpf(ex._eval_loose(d, origin))
    return out


# ---------------------------------------------------------------------
# Parallel transport
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class CurveSpec:
    """Parametric curve: coordinate functions of one parameter symbol."""

    param: Expr
    functions: tuple[Expr, ...]
    interval: tuple[float, float]
    steps: int = 4096

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if len(self.functions) < 1:
            raise ValueError("curve needs coordinate functions")


@dataclass(frozen=True)
class TransportResult:
    end: tuple[float, ...]
    norm_start: float
    norm_end: float
    max_norm_drift: float


def _lambdify(args, e: sp.Expr):
    return sp.lambdify(args, e, modules="math")


def parallel_transport(m: Metric, curve: CurveSpec, v0,
                       constants: Bindings | None = None) -> TransportResult:
    """Fixed-step RK4 integration of a_{j||k} dx^k = 0 along the curve.

    `v0` holds the covector components at the curve start.  Free constants
    in the metric or the curve are taken from `constants`; a free symbol
    named ``pi`` defaults to the circle constant.
    """
    if len(curve.functions) != m.dim:
        raise ValueError("curve must give one function per coordinate")
    consts = dict(constants or {})
    free = set()
    for f in curve.functions:
        free |= f.free_symbols()
    for c in m.field.comps:
        free |= c.free_symbols()
    free -= set(m.chart.coord_names())
    free -= {curve.param.sym.name}
    if "pi" in free and "pi" not in consts:
        consts["pi"] = math.pi
    missing = free - set(consts)
    if missing:
        raise ex.UnboundSymbol(", ".join(sorted(missing)))
    const_table = {sp.Symbol(k): float(v) for k, v in consts.items()}

    s = curve.param.sym
    xfun = [_lambdify([s], f.sym.subs(const_table)) for f in curve.functions]
    xdot = [_lambdify([s], sp.diff(f.sym, s).subs(const_table))
            for f in curve.functions]
    gamma = christoffel(m)
    coords = [c.sym for c in m.chart.coords]
    gfun = {}
    for idx, e in gamma.nonzero():
        gfun[idx] = _lambdify(coords, e.sym.subs(const_table))
    ginv = [[_lambdify(coords, m.inverse_component(i, j).sym.subs(const_table))
             for j in range(m.dim)] for i in range(m.dim)]

    dim = m.dim

    def rhs(sv, a):
        try:
            x = [f(sv) for f in xfun]
            dx = [f(sv) for f in xdot]
            out = [0.0] * dim
            for (mm, j, k), gf in gfun.items():
                out[j] += gf(*x) * dx[k] * a[mm]
            return out, x
        except (ZeroDivisionError, ValueError, OverflowError) as err:
            raise DomainError(f"curve hit a singular point at s={sv}",
                              str(err)) from None

    def norm(x, a):
        total = 0.0
        for i in range(dim):
            for j in range(dim):
                total += ginv[i][j](*x) * a[i] * a[j]
        return total

    a = [float(v) for v in v0]
    s0, s1 = float(curve.interval[0]), float(curve.interval[1])
    h = (s1 - s0) / curve.steps
    k0, x = rhs(s0, a)
    n_start = norm(x, a)
    drift = 0.0
    sv = s0
    for _ in range(curve.steps):
        k1, x = rhs(sv, a)
        a1 = [a[i] + 0.5 * h * k1[i] for i in range(dim)]
        k2, _ = rhs(sv + 0.5 * h, a1)
        a2 = [a[i] + 0.5 * h * k2[i] for i in range(dim)]
        k3, _ = rhs(sv + 0.5 * h, a2)
        a3 = [a[i] + h * k3[i] for i in range(dim)]
        k4, _ = rhs(sv + h, a3)
        a = [a[i] + h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i])
             for i in range(dim)]
        sv += h
        if any(math.isnan(c) or math.isinf(c) for c in a):
            raise DomainError(f"transport diverged at s={sv}")
        _, x = rhs(sv, a)
        drift = max(drift, abs(norm(x, a) - n_start))
    n_end = norm(x, a)
    return TransportResult(tuple(a), n_start, n_end, drift)


# ---------------------------------------------------------------------
# Projective connection invariant
# ---------------------------------------------------------------------

def veblen_projective_connection(c: ConnectionCoeffs) -> ConnectionCoeffs:
    """Trace-adjusted combination invariant under reparameterization shifts."""
    dim = c.dim
    trace = []
    for j in range(dim):
        total = sp.Integer(0)
        for a in range(dim):
            total += c[a, a, j].sym
        trace.append(Expr(total))

    def fn(i, j, k):
        e = c[i, j, k].sym
        if i == k:
            e -= sp.Rational(1, dim + 1) * trace[j].sym
        if i == j:
            e -= sp.Rational(1, dim + 1) * trace[k].sym
        return ex.simplify(Expr(e))

    return ConnectionCoeffs.from_function(c.chart, fn)


def gamma_phi_shift(c: ConnectionCoeffs, phi: TensorField) -> ConnectionCoeffs:
    """Reparameterization shift of the coefficients by a covector field."""
    if phi.chart != c.chart:
        raise ChartMismatch("shift covector lives on a different chart")
    if phi.variance != (tn.DOWN,):
        raise ValueError("shift field must be a covector")

    def fn(i, j, k):
        e = c[i, j, k].sym
        if i == j:
            e += phi[k].sym
        if i == k:
            e += phi[j].sym
        return Expr(e)

    return ConnectionCoeffs.from_function(c.chart, fn)

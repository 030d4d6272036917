"""Exact symbolic scalar kernel.

Expressions are immutable wrappers around a restricted sympy tree:
rational literals, constant symbols, coordinate symbols, n-ary sums and
products, powers with rational exponents, and the elementary functions
exp, log, sin, cos.  Construction canonicalizes (flattening, merging of
numeric factors, absorption of 0 and 1) so the wrapped tree is always in
canonical form.  Equivalence of two expressions is decided by rational
normalization with a deterministic seeded-sampling fallback.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

import mpmath
import sympy as sp

from .errors import DomainError, SamplingExhausted, UnboundSymbol

__all__ = [
    "Expr",
    "Bindings",
    "CoordinateSymbol",
    "integer",
    "rational",
    "constant",
    "coordinate",
    "exp",
    "log",
    "sin",
    "cos",
    "sqrt",
    "simplify",
    "diff",
    "evaluate",
    "equivalent",
    "equivalence_report",
    "sample_points",
    "max_residual",
    "to_text",
]

# Default equivalence-check parameters.
SAMPLE_POINTS = 24
SAMPLE_BOUND = 97
RELATIVE_TOL = 1e-9
POLE_GAP = 1e-6
_EVAL_DPS = 50

_FUNCTIONS = {"exp": sp.exp, "log": sp.log, "sin": sp.sin, "cos": sp.cos}
_FUNC_NAMES = {sp.exp: "exp", sp.log: "log", sp.sin: "sin", sp.cos: "cos"}


class CoordinateSymbol(sp.Symbol):
    """Symbol that a chart declared as a coordinate (constants are plain Symbols)."""


def _validate(node: sp.Expr) -> None:
    for sub in sp.preorder_traversal(node):
        if sub in (sp.zoo, sp.oo, -sp.oo, sp.nan):
            raise DomainError("undefined value in expression", sub)
        if isinstance(sub, (sp.Integer, sp.Rational, sp.Symbol)):
            continue
        if sub is sp.E:
            continue
        if isinstance(sub, (sp.Add, sp.Mul)):
            continue
        if isinstance(sub, sp.Pow):
            if not isinstance(sub.exp, sp.Rational):
                raise DomainError("only rational exponents are supported", sub)
            continue
        if isinstance(sub, tuple(_FUNCTIONS.values())):
            continue
        raise DomainError("unsupported node in expression", sub)


@dataclass(frozen=True)
class Expr:
    """Immutable canonical scalar expression."""

    sym: sp.Expr

    def __post_init__(self):
        _validate(self.sym)

    # -- node inspection ------------------------------------------------

    @property
    def kind(self) -> str:
        s = self.sym
        if s is sp.E:
            return "exp"
        if isinstance(s, sp.Rational):
            return "rational"
        if isinstance(s, CoordinateSymbol):
            return "coordinate"
        if isinstance(s, sp.Symbol):
            return "constant"
        if isinstance(s, sp.Add):
            return "sum"
        if isinstance(s, sp.Mul):
            return "product"
        if isinstance(s, sp.Pow):
            return "power"
        return _FUNC_NAMES[type(s)]

    @property
    def children(self) -> tuple["Expr", ...]:
        s = self.sym
        if s is sp.E:
            return (Expr(sp.Integer(1)),)
        if isinstance(s, (sp.Add, sp.Mul)):
            args = sorted(s.args, key=sp.default_sort_key)
            return tuple(Expr(a) for a in args)
        return tuple(Expr(a) for a in s.args)

    def free_symbols(self) -> frozenset[str]:
        return frozenset(s.name for s in self.sym.free_symbols)

    @property
    def is_rational_function(self) -> bool:
        """True when evaluation at rational points stays exact (no function
        nodes, integer exponents only)."""
        for sub in sp.preorder_traversal(self.sym):
            if sub is sp.E or isinstance(sub, tuple(_FUNCTIONS.values())):
                return False
            if isinstance(sub, sp.Pow) and not sub.exp.is_Integer:
                return False
        return True

    # -- arithmetic -----------------------------------------------------

    def __add__(self, other):
        return Expr(self.sym + _coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Expr(self.sym - _coerce(other))

    def __rsub__(self, other):
        return Expr(_coerce(other) - self.sym)

    def __mul__(self, other):
        return Expr(self.sym * _coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Expr(self.sym / _coerce(other))

    def __rtruediv__(self, other):
        return Expr(_coerce(other) / self.sym)

    def __pow__(self, other):
        return Expr(self.sym ** _coerce(other))

    def __neg__(self):
        return Expr(-self.sym)

    def is_zero(self) -> bool:
        return self.sym == 0

    def subs(self, mapping: Mapping["Expr", "Expr"]) -> "Expr":
        """Simultaneous substitution (used by coordinate maps)."""
        table = {k.sym: v.sym for k, v in mapping.items()}
        return Expr(self.sym.subs(table, simultaneous=True))

    def __str__(self):
        return to_text(self)

    def __repr__(self):
        return f"Expr({to_text(self)})"


def _coerce(x) -> sp.Expr:
    if isinstance(x, Expr):
        return x.sym
    if isinstance(x, bool):
        raise TypeError("cannot mix booleans into expressions")
    if isinstance(x, int):
        return sp.Integer(x)
    if isinstance(x, Fraction):
        return sp.Rational(x.numerator, x.denominator)
    raise TypeError(f"cannot coerce {type(x).__name__} into Expr")


# -- constructors -------------------------------------------------------

def integer(n: int) -> Expr:
    return Expr(sp.Integer(n))


def rational(p: int, q: int = 1) -> Expr:
    if q == 0:
        raise DomainError("zero denominator in rational literal")
    return Expr(sp.Rational(p, q))


def constant(name: str) -> Expr:
    return Expr(sp.Symbol(name))


def coordinate(name: str) -> Expr:
    return Expr(CoordinateSymbol(name))


def exp(e: Expr) -> Expr:
    return Expr(sp.exp(_coerce(e)))


def log(e: Expr) -> Expr:
    return Expr(sp.log(_coerce(e)))


def sin(e: Expr) -> Expr:
    return Expr(sp.sin(_coerce(e)))


def cos(e: Expr) -> Expr:
    return Expr(sp.cos(_coerce(e)))


def sqrt(e: Expr) -> Expr:
    return Expr(sp.Pow(_coerce(e), sp.Rational(1, 2)))


# -- simplification -----------------------------------------------------

def simplify(e: Expr) -> Expr:
    """Canonical form: rational normalization over a common denominator.

    Idempotent and value preserving.  Does not attempt trigonometric or
    radical identities; those are the sampler's job in `equivalent`.
    """
    s = e.sym
    try:
        s = sp.cancel(sp.together(s))
    except (sp.PolynomialError, NotImplementedError):
        pass
    return Expr(s)


def diff(e: Expr, coord: Expr, order: int = 1) -> Expr:
    """Exact partial derivative with respect to a coordinate symbol."""
    if not isinstance(coord.sym, CoordinateSymbol):
        raise ValueError(f"{coord} is not a coordinate symbol")
    return Expr(sp.diff(e.sym, coord.sym, order))


# -- evaluation ---------------------------------------------------------

class Bindings(dict):
    """Map from symbol name to exact rational or floating value."""

    def __init__(self, values: Mapping[str, object] | None = None, **kw):
        super().__init__()
        merged = dict(values or {})
        merged.update(kw)
        for name, v in merged.items():
            self[name] = _as_value(v)

    def __setitem__(self, name, v):
        super().__setitem__(name, _as_value(v))


def _as_value(v):
    if isinstance(v, bool):
        raise TypeError("boolean is not a numeric binding")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, (Fraction, float, mpmath.mpf)):
        return v
    if isinstance(v, Expr) and isinstance(v.sym, sp.Rational):
        return Fraction(int(v.sym.p), int(v.sym.q))
    raise TypeError(f"unsupported binding value {v!r}")


class _NearPole(Exception):
    """Internal: sample point too close to a pole of a subexpression."""


def _to_mpf(v):
    if isinstance(v, Fraction):
        return mpmath.mpf(v.numerator) / mpmath.mpf(v.denominator)
    return mpmath.mpf(v)


def _eval_node(node: sp.Expr, env: Mapping[str, object], strict: bool):
    """Recursive evaluator.  Returns Fraction when exact, else mpmath.mpf.

    strict=False turns near-pole values into _NearPole (sampling rejection)
    instead of only exact poles raising DomainError.
    """
    if isinstance(node, sp.Rational):
        return Fraction(int(node.p), int(node.q))
    if node is sp.E:
        return mpmath.e
    if isinstance(node, sp.Symbol):
        try:
            return env[node.name]
        except KeyError:
            raise UnboundSymbol(node.name) from None
    if isinstance(node, sp.Add):
        vals = [_eval_node(a, env, strict) for a in node.args]
        if all(isinstance(v, Fraction) for v in vals):
            return sum(vals, Fraction(0))
        return mpmath.fsum(_to_mpf(v) for v in vals)
    if isinstance(node, sp.Mul):
        vals = [_eval_node(a, env, strict) for a in node.args]
        if all(isinstance(v, Fraction) for v in vals):
            out = Fraction(1)
            for v in vals:
                out *= v
            return out
        out = mpmath.mpf(1)
        for v in vals:
            out *= _to_mpf(v)
        return out
    if isinstance(node, sp.Pow):
        return _eval_pow(node, env, strict)
    fn = _FUNC_NAMES.get(type(node))
    if fn is not None:
        arg = _eval_node(node.args[0], env, strict)
        x = _to_mpf(arg)
        if fn == "log":
            if x <= 0:
                raise DomainError("log of non-positive value", node)
            if not strict and x < POLE_GAP:
                raise _NearPole
            return mpmath.log(x)
        return getattr(mpmath, fn)(x)
    raise DomainError("unsupported node in evaluation", node)


def _eval_pow(node: sp.Pow, env, strict):
    base = _eval_node(node.base, env, strict)
    e = node.exp
    p, q = int(e.p), int(e.q)
    if isinstance(base, Fraction):
        if p < 0 and base == 0:
            raise DomainError("division by zero", node)
        if p < 0 and not strict and abs(base) < POLE_GAP:
            raise _NearPole
        if q == 1:
            return base ** p
        if base < 0:
            raise DomainError("fractional power of negative value", node)
        root = _exact_root(base, q)
        if root is not None:
            return root ** p
        return _to_mpf(base) ** (mpmath.mpf(p) / q)
    x = _to_mpf(base)
    if p < 0:
        if x == 0:
            raise DomainError("division by zero", node)
        if not strict and abs(x) < POLE_GAP:
            raise _NearPole
    if q != 1 and x < 0:
        raise DomainError("fractional power of negative value", node)
    return x ** (mpmath.mpf(p) / q)


def _exact_root(x: Fraction, q: int) -> Fraction | None:
    def iroot(n):
        if n == 0:
            return 0
        r = round(n ** (1.0 / q))
        for c in (r - 1, r, r + 1):
            if c >= 0 and c ** q == n:
                return c
        return None

    a, b = iroot(x.numerator), iroot(x.denominator)
    if a is None or b is None:
        return None
    return Fraction(a, b)


def evaluate(e: Expr, bindings: Mapping[str, object]):
    """Evaluate at a point.  Exact Fraction when the path is rational,
    otherwise a high-precision float."""
    env = bindings if isinstance(bindings, Bindings) else Bindings(bindings)
    with mpmath.workdps(_EVAL_DPS):
        return _eval_node(e.sym, env, strict=True)


# -- equivalence --------------------------------------------------------

def _symbolic_zero(d: sp.Expr) -> bool:
    if d == 0:
        return True
    if sp.count_ops(d) > 4000:
        return False
    try:
        return sp.cancel(sp.together(d)) == 0
    except (sp.PolynomialError, NotImplementedError):
        return False


def sample_points(symbols: Iterable[str], seed: int, n: int = SAMPLE_POINTS,
                  reject=None, fixed: Mapping[str, object] | None = None,
                  max_draws: int | None = None) -> list[Bindings]:
    """Deterministic rational sample points for the named symbols.

    `reject` is called with each candidate binding and may raise _NearPole /
    DomainError to veto it.  `fixed` pins some symbols to given values.
    Raises SamplingExhausted when not enough pole-free points exist.
    """
    names = sorted(set(symbols))
    fixed = dict(fixed or {})
    rng = random.Random(seed)
    out: list[Bindings] = []
    draws = 0
    limit = max_draws if max_draws is not None else max(200, 60 * n)
    while len(out) < n:
        if draws >= limit:
            raise SamplingExhausted(
                f"found {len(out)}/{n} pole-free points after {draws} draws")
        draws += 1
        b = Bindings()
        for name in names:
            if name in fixed:
                b[name] = fixed[name]
            else:
                b[name] = Fraction(rng.randint(-SAMPLE_BOUND, SAMPLE_BOUND),
                                   rng.randint(1, SAMPLE_BOUND))
        if reject is not None:
            try:
                reject(b)
            except (_NearPole, DomainError):
                continue
        out.append(b)
    return out


def _eval_loose(e: Expr, b: Bindings):
    with mpmath.workdps(_EVAL_DPS):
        return _eval_node(e.sym, b, strict=False)


def equivalence_report(a: Expr, b: Expr, seed: int = 0, n: int = SAMPLE_POINTS,
                       tol: float = RELATIVE_TOL,
                       fixed: Mapping[str, object] | None = None) -> dict:
    """Decide equivalence; returns a dict with verdict, route and witness."""
    d = a.sym - b.sym
    if _symbolic_zero(d):
        return {"equal": True, "route": "canonical", "witness": None}
    names = a.free_symbols() | b.free_symbols()

    def reject(bind):
        _eval_loose(a, bind)
        _eval_loose(b, bind)

    points = sample_points(names, seed, n, reject=reject, fixed=fixed)
    for bind in points:
        va = _eval_loose(a, bind)
        vb = _eval_loose(b, bind)
        if isinstance(va, Fraction) and isinstance(vb, Fraction):
            if va != vb:
                return {"equal": False, "route": "sampled",
                        "witness": _witness(bind, va, vb)}
        else:
            x, y = _to_mpf(va), _to_mpf(vb)
            scale = max(1.0, abs(x), abs(y))
            if abs(x - y) > tol * scale:
                return {"equal": False, "route": "sampled",
                        "witness": _witness(bind, x, y)}
    return {"equal": True, "route": "sampled", "witness": None}


def _witness(bind: Bindings, va, vb) -> dict:
    w = {k: str(v) for k, v in sorted(bind.items())}
    w["lhs"] = mpmath.nstr(_to_mpf(va), 12) if not isinstance(va, Fraction) else str(va)
    w["rhs"] = mpmath.nstr(_to_mpf(vb), 12) if not isinstance(vb, Fraction) else str(vb)
    return w


def equivalent(a: Expr, b: Expr, seed: int = 0, n: int = SAMPLE_POINTS,
               tol: float = RELATIVE_TOL,
               fixed: Mapping[str, object] | None = None) -> bool:
    return equivalence_report(a, b, seed, n, tol, fixed)["equal"]


def max_residual(exprs: Iterable[Expr], seed: int = 0, n: int = SAMPLE_POINTS,
                 fixed: Mapping[str, object] | None = None) -> tuple[float, dict | None]:
    """Largest |value| of the given expressions over shared sample points.

    Expressions that normalize to zero symbolically are skipped.  Returns
    (max_abs, witness-of-max) with witness None when everything is zero.
    """
    survivors = [e for e in exprs if not _symbolic_zero(e.sym)]
    if not survivors:
        return 0.0, None
    names = set()
    for e in survivors:
        names |= e.free_symbols()

    def reject(bind):
        for e in survivors:
            _eval_loose(e, bind)

    points = sample_points(names, seed, n, reject=reject, fixed=fixed)
    worst = 0.0
    worst_w = None
    for bind in points:
        for e in survivors:
            v = _eval_loose(e, bind)
            mag = abs(v) if isinstance(v, Fraction) else abs(_to_mpf(v))
            if float(mag) > worst:
                worst = float(mag)
                worst_w = _witness(bind, v, Fraction(0))
    return worst, worst_w


# -- canonical printer --------------------------------------------------

_ATOM = 4
_POW = 3
_MUL = 2
_ADD = 1


def to_text(e: Expr) -> str:
    """Canonical text form; `parse_expr(to_text(e))` rebuilds `e`."""
    return _print(e.sym, _ADD)


def _print(node: sp.Expr, ctx: int) -> str:
    if node is sp.E:
        return "exp(1)"
    if isinstance(node, sp.Rational):
        if node.q == 1:
            s = str(node.p)
            return _wrap(s, _ATOM if node.p >= 0 else _ADD, ctx)
        return _wrap(f"{node.p}/{node.q}", _MUL, ctx)
    if isinstance(node, sp.Symbol):
        return node.name
    if isinstance(node, sp.Add):
        terms = sorted(node.args, key=sp.default_sort_key)
        parts = []
        for t in terms:
            c, rest = t.as_coeff_Mul()
            if c.is_negative and parts:
                parts.append(" - " + _print(-t, _MUL))
            elif parts:
                parts.append(" + " + _print(t, _MUL))
            else:
                parts.append(_print(t, _MUL) if not c.is_negative
                             else "-" + _print(-t, _MUL))
        return _wrap("".join(parts), _ADD, ctx)
    if isinstance(node, sp.Mul):
        num, den = [], []
        coeff = sp.Integer(1)
        for f in sorted(node.args, key=sp.default_sort_key):
            if isinstance(f, sp.Rational):
                coeff *= f
            elif isinstance(f, sp.Pow) and f.exp.is_Rational and f.exp < 0:
                den.append(sp.Pow(f.base, -f.exp))
            else:
                num.append(f)
        neg = coeff.is_negative
        coeff = abs(coeff)
        if coeff.p != 1 or not num:
            num.insert(0, sp.Integer(coeff.p))
        if coeff.q != 1:
            den.insert(0, sp.Integer(coeff.q))
        top = "*".join(_print(f, _POW) for f in num)
        if den:
            if len(den) == 1:
                bot = _print(den[0], _ATOM)
            else:
                bot = "(" + "*".join(_print(f, _POW) for f in den) + ")"
            top = f"{top}/{bot}"
        if neg:
            return _wrap("-" + top, _ADD, ctx)
        return _wrap(top, _MUL, ctx)
    if isinstance(node, sp.Pow):
        if node.exp.is_Rational and node.exp < 0:
            inv = sp.Pow(node.base, -node.exp)
            return _wrap("1/" + _print(inv, _ATOM), _MUL, ctx)
        base = _print(node.base, _ATOM)
        if not (isinstance(node.base, sp.Symbol)
                or (isinstance(node.base, sp.Integer) and node.base >= 0)
                or type(node.base) in _FUNC_NAMES):
            base = "(" + _print(node.base, _ADD) + ")"
        if node.exp.is_Integer:
            return _wrap(f"{base}^{node.exp.p}", _POW, ctx)
        return _wrap(f"{base}^({node.exp.p}/{node.exp.q})", _POW, ctx)
    fn = _FUNC_NAMES.get(type(node))
    if fn is not None:
        return f"{fn}({_print(node.args[0], _ADD)})"
    raise DomainError("unsupported node in printer", node)


def _wrap(s: str, prec: int, ctx: int) -> str:
    return f"({s})" if prec < ctx else s

"""Text front ends: infix expression grammar and the model manifest format.

Expression grammar (UTF-8 text, byte offsets in errors):

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right associative
    atom   := NUMBER | IDENT | FUNC '(' expr ')' | '(' expr ')'

`^` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``.  FUNC is one
of exp, log, sin, cos.  NUMBER is a non-negative integer; rationals are
written ``p/q`` and canonicalize to rational literals.

The manifest format is line oriented: ``[section]`` headers, ``key = value``
lines, ``#`` comments to end of line, LF line endings.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from . import expr as ex
from .errors import DomainError, ParseError, ValidationError

__all__ = ["parse_expr", "parse_manifest", "ModelSpec", "manifest_text"]

_FUNCS = {"exp": ex.exp, "log": ex.log, "sin": ex.sin, "cos": ex.cos}
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUM_RE = re.compile(r"[0-9]+")


class _Tokens:
    """Token stream over a source string, tracking byte offsets."""

    def __init__(self, text: str):
        self.text = text
        self.toks: list[tuple[str, object, int]] = []  # (kind, value, offset)
        self._lex()
        self.pos = 0

    def _lex(self):
        text, i, n = self.text, 0, len(self.text)
        while i < n:
            c = text[i]
            if c.isspace():
                i += 1
                continue
            if c in "+-*/^()":
                self.toks.append((c, c, i))
                i += 1
                continue
            m = _NUM_RE.match(text, i)
            if m:
                self.toks.append(("num", int(m.group()), i))
                i = m.end()
                continue
            m = _IDENT_RE.match(text, i)
            if m:
                self.toks.append(("ident", m.group(), i))
                i = m.end()
                continue
            raise ParseError(f"unexpected character {c!r}", offset=i,
                             expected={"number", "identifier", "operator"})
        self.toks.append(("end", None, n))

    def peek(self):
        return self.toks[self.pos]

    def next(self):
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, kind):
        k, v, off = self.peek()
        if k != kind:
            raise ParseError(f"unexpected {_show(k, v)}", offset=off,
                             expected={kind})
        return self.next()


def _show(kind, value):
    if kind == "end":
        return "end of input"
    return repr(str(value))


def parse_expr(text: str, coords: Mapping[str, ex.Expr] | Sequence[str] = ()) -> ex.Expr:
    """Parse one expression.  Identifiers named in `coords` become coordinate
    symbols; every other identifier is a constant symbol."""
    coord_map = _coord_map(coords)
    toks = _Tokens(text)
    e = _parse_sum(toks, coord_map)
    k, v, off = toks.peek()
    if k != "end":
        raise ParseError(f"unexpected {_show(k, v)}", offset=off,
                         expected={"end"})
    return e


def _coord_map(coords) -> dict[str, ex.Expr]:
    if isinstance(coords, Mapping):
        return dict(coords)
    return {name: ex.coordinate(name) for name in coords}


def _parse_sum(toks, coords):
    e = _parse_term(toks, coords)
    while toks.peek()[0] in ("+", "-"):
        op, _, off = toks.next()
        rhs = _parse_term(toks, coords)
        e = e + rhs if op == "+" else e - rhs
    return e


def _parse_term(toks, coords):
    e = _parse_unary(toks, coords)
    while toks.peek()[0] in ("*", "/"):
        op, _, off = toks.next()
        rhs = _parse_unary(toks, coords)
        if op == "*":
            e = e * rhs
        else:
            try:
                e = e / rhs
            except DomainError:
                raise ParseError("division by zero", offset=off) from None
    return e


def _parse_unary(toks, coords):
    if toks.peek()[0] == "-":
        toks.next()
        return -_parse_unary(toks, coords)
    return _parse_power(toks, coords)


def _parse_power(toks, coords):
    base = _parse_atom(toks, coords)
    if toks.peek()[0] == "^":
        _, _, off = toks.next()
        exponent = _parse_unary(toks, coords)
        try:
            return base ** exponent
        except DomainError as err:
            raise ParseError(str(err), offset=off) from None
    return base


def _parse_atom(toks, coords):
    k, v, off = toks.next()
    if k == "num":
        return ex.integer(v)
    if k == "(":
        e = _parse_sum(toks, coords)
        toks.expect(")")
        return e
    if k == "ident":
        if v in _FUNCS:
            if toks.peek()[0] != "(":
                raise ParseError(f"function {v!r} must be applied",
                                 offset=toks.peek()[2], expected={"("})
            toks.next()
            arg = _parse_sum(toks, coords)
            toks.expect(")")
            return _FUNCS[v](arg)
        if toks.peek()[0] == "(":
            raise ParseError(f"unknown function {v!r}", offset=off,
                             expected=set(_FUNCS))
        if v in coords:
            return coords[v]
        return ex.constant(v)
    raise ParseError(f"unexpected {_show(k, v)}", offset=off,
                     expected={"number", "identifier", "(", "-"})


# ---------------------------------------------------------------------
# Manifest format
# ---------------------------------------------------------------------

_SECTIONS = ("manifold", "constants", "metric", "potential", "scalars")
_SECTION_RE = re.compile(r"^\[([A-Za-z_]+)\]$")
_KEY_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)((?:\[[0-9]+\])*)$")
_STRING_RE = re.compile(r'^"([^"]*)"$')
_LIST_RE = re.compile(r"^\[(.*)\]$")
_RATIONAL_RE = re.compile(r"^-?[0-9]+(/[0-9]+)?$")


@dataclass
class ModelSpec:
    """Parsed manifest: chart data plus metric/potential/scalar expressions."""

    name: str
    dim: int
    coords: tuple[str, ...]
    constants: dict[str, Fraction | None] = field(default_factory=dict)
    metric: tuple[tuple[ex.Expr, ...], ...] = ()
    potential: tuple[ex.Expr, ...] | None = None
    scalars: dict[str, ex.Expr] = field(default_factory=dict)

    @property
    def coord_exprs(self) -> dict[str, ex.Expr]:
        return {name: ex.coordinate(name) for name in self.coords}


def _strip_comment(line: str) -> str:
    out = []
    in_string = False
    for ch in line:
        if ch == '"':
            in_string = not in_string
        if ch == "#" and not in_string:
            break
        out.append(ch)
    return "".join(out).strip()


def parse_manifest(text: str) -> ModelSpec:
    """Parse and validate a model manifest."""
    sections: dict[str, list[tuple[int, str, str]]] = {}
    current = None
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        m = _SECTION_RE.match(line)
        if m:
            name = m.group(1)
            if name not in _SECTIONS:
                raise ParseError(f"unknown section [{name}]", line=lineno,
                                 expected=set(_SECTIONS))
            if name in sections:
                raise ParseError(f"duplicate section [{name}]", line=lineno)
            sections[name] = []
            current = name
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", line=lineno,
                             expected={"="})
        if current is None:
            raise ParseError("assignment before any section header",
                             line=lineno, expected={"[manifold]"})
        key, _, value = line.partition("=")
        sections[current].append((lineno, key.strip(), value.strip()))

    if "manifold" not in sections:
        raise ParseError("missing [manifold] section", line=1,
                         expected={"[manifold]"})
    if "metric" not in sections:
        raise ParseError("missing [metric] section", line=1,
                         expected={"[metric]"})

    name, dim, coords = _parse_manifold(sections["manifold"])
    constants = _parse_constants(sections.get("constants", []))
    coord_map = {c: ex.coordinate(c) for c in coords}
    known = set(coords) | set(constants)

    def parse_value_expr(lineno, text_value):
        m = _STRING_RE.match(text_value)
        if not m:
            raise ParseError("expected a quoted expression", line=lineno,
                             expected={'"..."'})
        try:
            e = parse_expr(m.group(1), coord_map)
        except ParseError as err:
            raise ParseError(f"in expression {m.group(1)!r}: {err}",
                             line=lineno) from None
        unknown = e.free_symbols() - known
        if unknown:
            raise ValidationError(
                f"line {lineno}: undeclared symbol(s) {sorted(unknown)}; "
                "declare constants in [constants]")
        return e

    metric = _parse_metric(sections["metric"], dim, parse_value_expr)
    potential = None
    if "potential" in sections:
        potential = _parse_potential(sections["potential"], dim,
                                     parse_value_expr)
    scalars: dict[str, ex.Expr] = {}
    for lineno, key, value in sections.get("scalars", []):
        if key not in ("J", "chi"):
            raise ValidationError(
                f"line {lineno}: unknown scalar {key!r} (expected J or chi)")
        if key in scalars:
            raise ValidationError(f"line {lineno}: duplicate scalar {key!r}")
        scalars[key] = parse_value_expr(lineno, value)

    return ModelSpec(name=name, dim=dim, coords=coords, constants=constants,
                     metric=metric, potential=potential, scalars=scalars)


def _parse_manifold(items):
    name = None
    dim = None
    coords = None
    for lineno, key, value in items:
        if key == "name":
            m = _STRING_RE.match(value)
            if not m:
                raise ParseError("name must be a quoted string", line=lineno)
            name = m.group(1)
        elif key == "dim":
            if not value.isdigit():
                raise ParseError("dim must be a positive integer", line=lineno)
            dim = int(value)
        elif key == "coords":
            m = _LIST_RE.match(value)
            if not m:
                raise ParseError('coords must be a list like ["t", "r"]',
                                 line=lineno)
            parts = [p.strip() for p in m.group(1).split(",") if p.strip()]
            names = []
            for p in parts:
                ms = _STRING_RE.match(p)
                if not ms or not _IDENT_RE.fullmatch(ms.group(1)):
                    raise ParseError(f"bad coordinate name {p}", line=lineno)
                names.append(ms.group(1))
            coords = tuple(names)
        else:
            raise ParseError(f"unknown manifold key {key!r}", line=lineno,
                             expected={"name", "dim", "coords"})
    if name is None or dim is None or coords is None:
        raise ParseError("[manifold] requires name, dim and coords", line=1)
    if dim < 1:
        raise ValidationError("dim must be >= 1")
    if len(coords) != dim:
        raise ValidationError(
            f"declared dim {dim} but {len(coords)} coordinates")
    if len(set(coords)) != len(coords):
        raise ValidationError("coordinate names must be distinct")
    return name, dim, coords


def _parse_constants(items) -> dict[str, Fraction | None]:
    out: dict[str, Fraction | None] = {}
    for lineno, key, value in items:
        if not _IDENT_RE.fullmatch(key):
            raise ParseError(f"bad constant name {key!r}", line=lineno)
        if key in out:
            raise ValidationError(f"line {lineno}: duplicate constant {key!r}")
        if value == "free":
            out[key] = None
        elif _RATIONAL_RE.match(value):
            p, _, q = value.partition("/")
            out[key] = Fraction(int(p), int(q) if q else 1)
        else:
            raise ParseError(
                f"constant {key!r} must be 'free' or a rational value",
                line=lineno, expected={"free", "p/q"})
    return out


def _split_indices(key: str, lineno: int, base: str, count: int):
    m = _KEY_RE.match(key)
    if not m or m.group(1) != base:
        raise ParseError(f"expected {base}[i]... keys, got {key!r}",
                         line=lineno)
    idx = re.findall(r"\[([0-9]+)\]", m.group(2))
    if len(idx) != count:
        raise ParseError(f"{base} takes {count} indices", line=lineno)
    return tuple(int(i) for i in idx)


def _parse_metric(items, dim, parse_value_expr):
    declared: dict[tuple[int, int], tuple[int, ex.Expr]] = {}
    for lineno, key, value in items:
        i, j = _split_indices(key, lineno, "g", 2)
        if not (0 <= i < dim and 0 <= j < dim):
            raise ValidationError(
                f"line {lineno}: metric index out of range for dim {dim}")
        if (i, j) in declared:
            raise ValidationError(f"line {lineno}: duplicate entry g[{i}][{j}]")
        declared[(i, j)] = (lineno, parse_value_expr(lineno, value))
    zero = ex.integer(0)
    comps = [[zero for _ in range(dim)] for _ in range(dim)]
    for (i, j), (lineno, e) in declared.items():
        if (j, i) in declared and j != i:
            other = declared[(j, i)][1]
            if not ex.equivalent(e, other):
                raise ValidationError(
                    f"asymmetric metric: g[{i}][{j}] and g[{j}][{i}] differ")
        comps[i][j] = e
        if comps[j][i].is_zero():
            comps[j][i] = e
    return tuple(tuple(row) for row in comps)


def _parse_potential(items, dim, parse_value_expr):
    zero = ex.integer(0)
    comps = [zero for _ in range(dim)]
    seen = set()
    for lineno, key, value in items:
        (i,) = _split_indices(key, lineno, "phi", 1)
        if not 0 <= i < dim:
            raise ValidationError(
                f"line {lineno}: potential index out of range for dim {dim}")
        if i in seen:
            raise ValidationError(f"line {lineno}: duplicate entry phi[{i}]")
        seen.add(i)
        comps[i] = parse_value_expr(lineno, value)
    return tuple(comps)


def manifest_text(spec: ModelSpec) -> str:
    """Serialize a ModelSpec back into manifest form (canonical printer)."""
    lines = ["[manifold]",
             f'name = "{spec.name}"',
             f"dim = {spec.dim}",
             "coords = [" + ", ".join(f'"{c}"' for c in spec.coords) + "]"]
    if spec.constants:
        lines.append("[constants]")
        for k in sorted(spec.constants):
            v = spec.constants[k]
            lines.append(f"{k} = free" if v is None else f"{k} = {v}")
    lines.append("[metric]")
    for i in range(spec.dim):
        for j in range(i, spec.dim):
            e = spec.metric[i][j]
            if not e.is_zero():
                lines.append(f'g[{i}][{j}] = "{ex.to_text(e)}"')
    if spec.potential is not None:
        lines.append("[potential]")
        for i, e in enumerate(spec.potential):
            if not e.is_zero():
                lines.append(f'phi[{i}] = "{ex.to_text(e)}"')
    if spec.scalars:
        lines.append("[scalars]")
        for k in sorted(spec.scalars):
            lines.append(f'{k} = "{ex.to_text(spec.scalars[k])}"')
    return "\n".join(lines) + "\n"

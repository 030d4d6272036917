"""Exception hierarchy shared across the package."""


class ProjektorError(Exception):
    """Base class for all errors raised by this package."""


class UnboundSymbol(ProjektorError):
    """Evaluation hit a free symbol with no value in the bindings."""

    def __init__(self, name):
        self.name = name
        super().__init__(f"unbound symbol: {name}")


class DomainError(ProjektorError):
    """Evaluation left the domain of definition (pole, branch cut, ...)."""

    def __init__(self, message, subexpression=None):
        self.subexpression = subexpression
        if subexpression is not None:
            message = f"{message}: {subexpression}"
        super().__init__(message)


class SamplingExhausted(ProjektorError):
    """Could not find enough pole-free sample points."""


class ParseError(ProjektorError):
    """Syntax error; carries a byte offset (or line number) and what was expected."""

    def __init__(self, message, offset=None, expected=(), line=None):
        self.offset = offset
        self.expected = frozenset(expected)
        self.line = line
        where = ""
        if line is not None:
            where = f" (line {line})"
        elif offset is not None:
            where = f" (offset {offset})"
        exp = ""
        if self.expected:
            exp = "; expected one of: " + ", ".join(sorted(self.expected))
        super().__init__(f"{message}{where}{exp}")


class ValidationError(ProjektorError):
    """Manifest parsed but violates a model invariant."""


class SlotError(ProjektorError):
    """Tensor slot missing or of the wrong variance."""


class SignatureMismatch(ProjektorError):
    """Tensor operands have incompatible variance signatures."""


class ChartMismatch(ProjektorError):
    """Tensor operands live on different charts."""


class MapError(ProjektorError):
    """Coordinate maps are not mutually inverse (or not invertible)."""


class SingularMetric(ProjektorError):
    """Metric determinant vanishes (symbolically or at a required point)."""


class ZeroJ(ProjektorError):
    """The model scalar J vanishes where it must not."""


class NonUnitJ(ProjektorError):
    """Operation requires a model with J = 1."""


class ZeroChi(ProjektorError):
    """The coupling scalar vanishes where it must not."""

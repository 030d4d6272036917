"""projektor: symbolic tensor calculus with built-in identity verification.

The package is organized as:

- ``expr``       exact scalar expressions (canonical form, diff, evaluation,
                 seeded equivalence checking)
- ``parser``     infix expression grammar and the model-manifest format
- ``tensor``     charts, tensor fields, metric algebra, coordinate maps
- ``riemann``    connection coefficients, covariant derivatives, curvature,
                 parallel transport, projective connection invariant
- ``projective`` five-dimensional homogeneous models, projectors, reduction,
                 congruence differentiation
- ``fieldeq``    field-equation residuals, gauge transforms, Lagrangian
                 densities and their 5D/4D equivalence
- ``cli``        command-line front end (``projektor compute|verify|transport``)
"""

from .errors import (
    ProjektorError,
    UnboundSymbol,
    DomainError,
    SamplingExhausted,
    ParseError,
    ValidationError,
    SlotError,
    SignatureMismatch,
    ChartMismatch,
    MapError,
    SingularMetric,
    ZeroJ,
    NonUnitJ,
    ZeroChi,
)
from .expr import (
    Expr,
    Bindings,
    integer,
    rational,
    constant,
    coordinate,
    exp,
    log,
    sin,
    cos,
    sqrt,
    simplify,
    diff,
    evaluate,
    equivalent,
    to_text,
)

__version__ = "0.1.0"

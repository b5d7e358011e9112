"""Disconjugacy of n-th order linear ODEs with a real parameter.

For T_n[M] u = u^(n) + a_1(t) u^(n-1) + ... + (a_n(t) + M) u on [a, b] the
package decides disconjugacy through Wronskians of the canonical
fundamental system, computes the closest-to-zero eigenvalues of the
(k, n-k) boundary value problems by shooting, assembles the exact interval
of M for which the equation is disconjugate and builds Green's functions
with sign checks.
"""

from .coeffexpr import ExprDomainError, ExprSyntaxError, UnknownIdentifierError, evaluate, parse, to_source
from .eigensolve import (
    DisconjugacyInterval,
    EigenRecord,
    characteristic,
    closest_eigenvalues,
    disconjugacy_interval,
    interval_from_spectrum,
    spectrum,
)
from .errors import (
    AmbiguousZeroError,
    DisconjError,
    InconclusiveScanError,
    IntegrationError,
    MultiplicityError,
    NotDisconjugateError,
    ProblemError,
    SingularBoundaryError,
    TangentialZeroWarning,
)
from .greenfn import GreenGrid, SignReport, build_green, cauchy_solution, verify_sign
from .odecore import FundamentalSystem, GridSpec, ProblemDef, companion_rhs, integrate_fundamental
from .wronskian import DisconjugacyReport, WronskianTrace, first_zero, is_disconjugate, trace, wronskian_at

__version__ = "0.1.0"

__all__ = [
    "AmbiguousZeroError",
    "DisconjError",
    "DisconjugacyInterval",
    "DisconjugacyReport",
    "EigenRecord",
    "ExprDomainError",
    "ExprSyntaxError",
    "FundamentalSystem",
    "GreenGrid",
    "GridSpec",
    "InconclusiveScanError",
    "IntegrationError",
    "MultiplicityError",
    "NotDisconjugateError",
    "ProblemDef",
    "ProblemError",
    "SignReport",
    "SingularBoundaryError",
    "TangentialZeroWarning",
    "UnknownIdentifierError",
    "WronskianTrace",
    "build_green",
    "cauchy_solution",
    "characteristic",
    "closest_eigenvalues",
    "companion_rhs",
    "disconjugacy_interval",
    "evaluate",
    "first_zero",
    "integrate_fundamental",
    "interval_from_spectrum",
    "is_disconjugate",
    "parse",
    "spectrum",
    "to_source",
    "trace",
    "verify_sign",
    "wronskian_at",
    "__version__",
]

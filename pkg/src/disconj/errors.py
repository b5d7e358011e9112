"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class DisconjError(Exception):
    """Base class for all errors raised by disconj."""


class ProblemError(DisconjError, ValueError):
    """An operator definition or problem file is invalid."""


class IntegrationError(DisconjError):
    """The initial value integration could not proceed.

    Attributes:
        t: the abscissa at which the integrator gave up.
    """

    def __init__(self, message: str, t: float):
        super().__init__(f"{message} (at t={t!r})")
        self.t = t


class AmbiguousZeroError(DisconjError):
    """A Wronskian dips close to zero but the tangency test is inconclusive."""

    def __init__(self, k: int, t: float, value: float):
        super().__init__(
            f"W_{k} has an unresolved near-zero dip at t={t!r} (|W|={abs(value):.3e}); "
            "refine the grid or loosen the tolerance"
        )
        self.k = k
        self.t = t
        self.value = value


class NotDisconjugateError(DisconjError):
    """The reference operator is not disconjugate, so the interval theory does not apply."""

    def __init__(self, report):
        super().__init__(
            f"T_n[{report.M!r}] is not disconjugate: W_{report.witness_k} vanishes at "
            f"t={report.omega!r}"
        )
        self.report = report


class InconclusiveScanError(DisconjError):
    """No eigenvalue was found in the scanned parameter range."""

    def __init__(self, ks, direction: str, radius: float):
        ks = tuple(ks)
        super().__init__(
            f"no {direction} eigenvalue for k in {list(ks)} within radius {radius!r}; "
            "enlarge the scan radius"
        )
        self.ks = ks
        self.direction = direction
        self.radius = radius


class MultiplicityError(DisconjError):
    """The eigenvalue is not simple (null space of dimension above one)."""


class SingularBoundaryError(DisconjError):
    """T_n[M] is not invertible on X_k because M sits on an eigenvalue."""

    def __init__(self, k: int, M: float, value: float):
        super().__init__(
            f"boundary system for k={k} is singular at M={M!r} "
            f"(boundary conditioning {value:.3e}); M is an eigenvalue location"
        )
        self.k = k
        self.M = M
        self.value = value


class TangentialZeroWarning(UserWarning):
    """A characteristic function touches zero without changing sign."""

"""Canonical fundamental system of T_n[M] u = 0.

The scalar equation

    u^(n) + a_1(t) u^(n-1) + ... + a_{n-1}(t) u' + (a_n(t) + M) u = 0

is integrated as the first-order companion system for the state
(u, u', ..., u^(n-1)).  All n canonical solutions are carried together as
the columns of an n x n state matrix ``Phi`` (rows: derivative order,
columns: solution index), starting from ``Phi[d, j-1] = 1`` iff ``d = n-j``.

The integrator is the Dormand-Prince 5(4) pair with PI step-size control
and the standard quartic continuous extension.  It also runs on stacks of
state matrices, one per value of M, so that a whole parameter scan shares
a single sequence of steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .coeffexpr import Expr, evaluate, is_constant, parse
from .errors import IntegrationError, ProblemError

__all__ = [
    "ProblemDef",
    "GridSpec",
    "DenseSolution",
    "FundamentalSystem",
    "companion_rhs",
    "canonical_initial_state",
    "integrate_states",
    "integrate_fundamental",
    "endpoint_states",
    "DELTA_FRACTION",
]

# Zeros of the Wronskians are only searched right of a + DELTA_FRACTION*(b-a);
# the integrator always lands exactly on that abscissa.
DELTA_FRACTION = 1e-4

# Cap on the step size when dense output is recorded, as a fraction of b-a.
# The quartic interpolant is not covered by the step error estimate.
DENSE_MAX_STEP_FRACTION = 1.0 / 128


@dataclass(frozen=True)
class ProblemDef:
    """The operator T_n[M] on [a, b] together with the reference parameter.

    ``coeffs[i-1]`` is a_i, the coefficient of u^(n-i).
    """

    n: int
    coeffs: tuple[Expr, ...]
    a: float
    b: float
    M_ref: float = 0.0
    _const: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 2:
            raise ProblemError(f"order must be an integer >= 2, got {self.n!r}")
        if len(self.coeffs) != self.n:
            raise ProblemError(f"expected {self.n} coefficients, got {len(self.coeffs)}")
        if not (math.isfinite(self.a) and math.isfinite(self.b) and self.a < self.b):
            raise ProblemError(f"interval must satisfy a < b, got [{self.a!r}, {self.b!r}]")
        if not math.isfinite(self.M_ref):
            raise ProblemError(f"m_ref must be finite, got {self.M_ref!r}")
        object.__setattr__(self, "coeffs", tuple(self.coeffs))
        # by derivative order d: the multiplier of u^(d) is a_{n-d}
        by_order = tuple(self.coeffs[self.n - 1 - d] for d in range(self.n))
        const = tuple(evaluate(e, self.a) if is_constant(e) else None for e in by_order)
        object.__setattr__(self, "_const", (by_order, const))

    @classmethod
    def from_strings(
        cls, order: int, coefficients: Sequence[str], interval: Sequence[float], m_ref: float = 0.0
    ) -> "ProblemDef":
        a, b = interval
        return cls(order, tuple(parse(s) for s in coefficients), float(a), float(b), float(m_ref))

    @property
    def length(self) -> float:
        return self.b - self.a

    def with_m_ref(self, m_ref: float) -> "ProblemDef":
        return ProblemDef(self.n, self.coeffs, self.a, self.b, float(m_ref))

    def order_coefficients(self, t: float) -> np.ndarray:
        """Coefficients indexed by derivative order: entry d multiplies u^(d) (M excluded)."""
        by_order, const = self._const
        return np.array([c if c is not None else evaluate(e, t) for e, c in zip(by_order, const)])


@dataclass(frozen=True)
class GridSpec:
    nodes: int = 2048
    atol: float = 1e-10
    rtol: float = 1e-10

    def __post_init__(self):
        if self.nodes < 64:
            raise ProblemError(f"grid needs at least 64 nodes, got {self.nodes}")
        if not (self.atol > 0 and self.rtol > 0):
            raise ProblemError("tolerances must be positive")


def companion_rhs(p: ProblemDef, M: float, t: float, state) -> np.ndarray:
    """Right-hand side of the companion system for one state vector.

    >>> p = ProblemDef.from_strings(2, ["0", "0"], [0, 1])
    >>> companion_rhs(p, 0.0, 0.3, [1.0, 2.0]).tolist()
    [2.0, 0.0]
    """
    state = np.asarray(state, dtype=float)
    if state.shape != (p.n,):
        raise ValueError(f"state must have length {p.n}")
    c = p.order_coefficients(t)
    c[0] += M
    out = np.empty(p.n)
    out[:-1] = state[1:]
    out[-1] = 0.0 - c @ state  # 0.0 - x keeps zero unsigned
    return out


def canonical_initial_state(n: int) -> np.ndarray:
    """Phi(a): column j-1 holds the derivatives of y_j, with y_j^(n-j)(a) = 1."""
    return np.fliplr(np.eye(n))


def _batched_rhs(p: ProblemDef, Ms: np.ndarray) -> Callable[[float, np.ndarray], np.ndarray]:
    # y has shape (m, n, c): member, derivative order, column
    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        c = p.order_coefficients(t)
        dy = np.empty_like(y)
        dy[:, :-1] = y[:, 1:]
        dy[:, -1] = -np.einsum("d,mdc->mc", c[1:], y[:, 1:]) - (c[0] + Ms)[:, None] * y[:, 0]
        return dy

    return rhs


# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)
_D = (
    -12715105075 / 11282082432,
    0.0,
    87487479700 / 32700410799,
    -10690763975 / 1880347072,
    701980252875 / 199316789632,
    -1453857185 / 822651844,
    69997945 / 29380423,
)

_SAFE = 0.9
_BETA = 0.04
_EXPO = 0.2 - 0.75 * _BETA
_FAC_MIN = 0.2  # largest step reduction per step
_FAC_MAX = 10.0  # largest step increase per step
_RESCALE_AT = 2.0**200
_MAX_STEPS = 1_000_000


class DenseSolution:
    """Piecewise quartic continuous extension of an accepted-step sequence."""

    def __init__(self, starts: np.ndarray, steps: np.ndarray, rcont: np.ndarray, t_end: float):
        self.starts = starts
        self.steps = steps
        self.rcont = rcont  # (K, 5) + state shape
        self.t0 = float(starts[0])
        self.t_end = float(t_end)

    @property
    def state_shape(self) -> tuple[int, ...]:
        return self.rcont.shape[2:]

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        idx = np.clip(np.searchsorted(self.starts, t, side="right") - 1, 0, len(self.starts) - 1)
        theta = (t - self.starts[idx]) / self.steps[idx]
        r = self.rcont[idx]
        th = theta.reshape(theta.shape + (1,) * len(self.state_shape))
        th1 = 1.0 - th
        y = r[:, 0] + th * (r[:, 1] + th1 * (r[:, 2] + th * (r[:, 3] + th1 * r[:, 4])))
        return y[0] if scalar else y


@dataclass
class _Result:
    t: float
    y: np.ndarray
    log_scale: np.ndarray
    dense: DenseSolution | None
    n_steps: int


def _norm(x: np.ndarray) -> np.ndarray:
    # RMS per batch member
    return np.sqrt(np.mean(x.reshape(x.shape[0], -1) ** 2, axis=1))


# overflow inside a trial step is caught by the error estimate below
@np.errstate(over="ignore", invalid="ignore")
def _dopri(
    rhs,
    t0: float,
    y0: np.ndarray,
    t1: float,
    rtol: float,
    atol: float,
    *,
    tstops: Sequence[float] = (),
    h_max: float = math.inf,
    dense: bool = False,
    rescale: bool = False,
) -> _Result:
    """Integrate y' = rhs(t, y) from t0 to t1 > t0 for a batch y0 of shape (m, ...)."""
    t = float(t0)
    y = np.array(y0, dtype=float)
    m = y.shape[0]
    log_scale = np.zeros(m)
    stops = sorted(s for s in tstops if t0 < s < t1) + [float(t1)]
    span = t1 - t0

    k1 = rhs(t, y)
    sk = atol + rtol * np.abs(y)
    d0 = _norm(y / sk).max()
    d1 = _norm(k1 / sk).max()
    h = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6 * span
    h = min(h, h_max, span)
    y1 = y + h * k1
    d2 = _norm((rhs(t + h, y1) - k1) / sk).max() / h
    dd = max(d1, d2)
    h1 = (0.01 / dd) ** 0.2 if dd > 1e-15 else max(1e-6 * span, h * 1e-3)
    h = min(100 * h, h1, h_max, span)

    starts, steps, rconts = [], [], []
    facold = 1e-4
    rejected = False
    n_steps = 0
    n_bad = 0
    while True:
        stop = stops[0]
        landing = t + 1.01 * h >= stop
        if landing:
            h = stop - t
        if h <= 16 * np.finfo(float).eps * max(abs(t), span):
            raise IntegrationError("step size underflow", t)
        n_steps += 1
        if n_steps > _MAX_STEPS:
            raise IntegrationError("too many steps", t)

        ks = [k1]
        for i in range(1, 7):
            yi = y + h * sum(a * kj for a, kj in zip(_A[i], ks) if a != 0.0)
            if i == 6:
                y_new = yi
            ks.append(rhs(t + _C[i] * h, yi))
        err_vec = h * sum(e * kj for e, kj in zip(_E, ks) if e != 0.0)
        sk = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(_norm(err_vec / sk).max())
        if not np.isfinite(err):
            n_bad += 1
            if n_bad > 20:
                raise IntegrationError("non-finite solution", t)
            h *= 0.25
            rejected = True
            continue
        n_bad = 0

        fac11 = err**_EXPO if err > 0 else 0.0
        fac = fac11 / facold**_BETA
        fac = min(1.0 / _FAC_MIN, max(1.0 / _FAC_MAX, fac / _SAFE))
        h_new = h / fac
        if err <= 1.0:
            facold = max(err, 1e-4)
            if dense:
                ydiff = y_new - y
                bspl = h * ks[0] - ydiff
                starts.append(t)
                steps.append(h)
                rconts.append(
                    np.stack(
                        [
                            y,
                            ydiff,
                            bspl,
                            ydiff - h * ks[6] - bspl,
                            h * sum(d * kj for d, kj in zip(_D, ks) if d != 0.0),
                        ]
                    )
                )
            t = stop if landing else t + h
            y = y_new
            k1 = ks[6]
            if rescale:
                big = np.abs(y.reshape(m, -1)).max(axis=1)
                hit = big > _RESCALE_AT
                if hit.any():
                    e = np.floor(np.log2(big[hit]))
                    factor = np.exp2(-e).reshape((-1,) + (1,) * (y.ndim - 1))
                    y[hit] *= factor
                    k1 = k1.copy()
                    k1[hit] *= factor
                    log_scale[hit] += e * math.log(2.0)
            if landing:
                stops.pop(0)
                if not stops:
                    break
            if rejected:
                h_new = min(h_new, h)
            rejected = False
            h = min(h_new, h_max)
        else:
            h = h / min(1.0 / _FAC_MIN, fac11 / _SAFE)
            rejected = True

    sol = None
    if dense:
        sol = DenseSolution(np.array(starts), np.array(steps), np.stack(rconts), t)
    return _Result(t, y, log_scale, sol, n_steps)


def integrate_states(
    p: ProblemDef,
    M: float,
    t0: float,
    y0: np.ndarray,
    g: GridSpec | None = None,
    tstops: Sequence[float] = (),
) -> DenseSolution:
    """Integrate initial data ``y0`` (shape (n,) or (n, c)) from t0 to b with dense output.

    The returned callable gives states of the same shape as ``y0``.
    """
    g = g or GridSpec()
    y0 = np.asarray(y0, dtype=float)
    col = y0.ndim == 1
    y = y0[None, :, None] if col else y0[None]
    if not p.a <= t0 < p.b:
        raise ValueError(f"t0 must lie in [a, b), got {t0!r}")
    res = _dopri(
        _batched_rhs(p, np.array([float(M)])),
        t0,
        y,
        p.b,
        g.rtol,
        g.atol,
        tstops=tstops,
        h_max=DENSE_MAX_STEP_FRACTION * p.length,
        dense=True,
    )
    d = res.dense
    rc = d.rcont[:, :, 0, :, 0] if col else d.rcont[:, :, 0]
    return DenseSolution(d.starts, d.steps, rc, d.t_end)


@dataclass(frozen=True)
class FundamentalSystem:
    """Samples of y_1[M], ..., y_n[M] and their derivatives up to order n-1.

    ``states[i, d, j-1]`` is the d-th derivative of y_j at ``t[i]``.
    """

    M: float
    t: np.ndarray
    states: np.ndarray
    dense: DenseSolution = field(repr=False)
    a: float
    b: float

    @property
    def n(self) -> int:
        return self.states.shape[1]

    def y(self, j: int, d: int = 0) -> np.ndarray:
        """Grid samples of the d-th derivative of y_j (j is one-based)."""
        if not 1 <= j <= self.n or not 0 <= d < self.n:
            raise IndexError(f"need 1 <= j <= {self.n} and 0 <= d < {self.n}")
        return self.states[:, d, j - 1]

    def state_at(self, t) -> np.ndarray:
        """State matrix at arbitrary t in [a, b] from the continuous extension."""
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < self.a) or np.any(t_arr > self.b):
            raise ValueError("t outside [a, b]")
        out = self.dense(t_arr)
        # the initial node is exact by construction
        if t_arr.ndim == 0:
            return canonical_initial_state(self.n) if t_arr == self.a else out
        out[t_arr == self.a] = canonical_initial_state(self.n)
        return out


def integrate_fundamental(p: ProblemDef, M: float, g: GridSpec | None = None) -> FundamentalSystem:
    """Integrate the n canonical solutions of T_n[M] u = 0 and sample them on the grid."""
    g = g or GridSpec()
    dense = integrate_states(
        p, M, p.a, canonical_initial_state(p.n), g, tstops=(p.a + DELTA_FRACTION * p.length,)
    )
    t = np.linspace(p.a, p.b, g.nodes)
    states = dense(t)
    states[0] = canonical_initial_state(p.n)
    if not np.all(np.isfinite(states)):
        raise IntegrationError("non-finite sample", float(t[~np.isfinite(states).all(axis=(1, 2))][0]))
    return FundamentalSystem(float(M), t, states, dense, p.a, p.b)


def endpoint_states(
    p: ProblemDef, Ms, g: GridSpec | None = None, rtol: float | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Phi(b) for every M in ``Ms``, integrated as one batch.

    Each matrix is returned divided by a power of two to stay in range; the
    true value is ``Phi * exp(log_scale)``.  Signs of all Wronskians at b
    are unaffected by the (positive) factor.
    """
    g = g or GridSpec()
    Ms = np.atleast_1d(np.asarray(Ms, dtype=float))
    y0 = np.broadcast_to(canonical_initial_state(p.n), (len(Ms), p.n, p.n))
    res = _dopri(
        _batched_rhs(p, Ms),
        p.a,
        y0,
        p.b,
        rtol if rtol is not None else g.rtol,
        g.atol,
        rescale=True,
    )
    return res.y, res.log_scale

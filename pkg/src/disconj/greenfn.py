"""Green's function of T_n[M] on X_k and its sign structure.

For s in (a, b) the kernel is

    g(t, s) = sum_j c_j(s) y_j(t) + [t >= s] v(t, s),

where v(., s) is the Cauchy function (the solution whose derivatives of
order 0..n-2 vanish at s and whose (n-1)-th derivative is 1 there) and the
coefficients c(s) enforce the (k, n-k) boundary conditions.  Under
disconjugacy, g(t, s) * p(t) >= 0 with p(t) = (t-a)^k (t-b)^(n-k), so g has
the sign (-1)^(n-k).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import SingularBoundaryError
from .odecore import FundamentalSystem, GridSpec, ProblemDef, integrate_fundamental, integrate_states

__all__ = [
    "CauchyTrajectory",
    "GreenGrid",
    "SignReport",
    "cauchy_solution",
    "build_green",
    "verify_sign",
    "DEFAULT_MESH",
    "DEFAULT_SIGN_TOL",
]

DEFAULT_MESH = 64
DEFAULT_SIGN_TOL = 1e-7
SINGULAR_FACTOR = 10.0  # boundary conditioning below this times rtol means M is an eigenvalue
_P_FLOOR = 1e-12


@dataclass(frozen=True)
class CauchyTrajectory:
    """The Cauchy function v(., s) on [s, b] with its derivatives.

    ``states[i, d]`` is the d-th derivative at ``t[i]``; calling the object
    evaluates the full state anywhere in [s, b].
    """

    s: float
    t: np.ndarray
    states: np.ndarray
    _dense: Callable = field(repr=False)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t < self.s) or np.any(t > self.t[-1]):
            raise ValueError("t outside [s, b]")
        return self._dense(t)

    @property
    def values(self) -> np.ndarray:
        return self.states[:, 0]


def cauchy_solution(p: ProblemDef, M: float, s: float, g: Optional[GridSpec] = None) -> CauchyTrajectory:
    """Integrate the Cauchy function of T_n[M] from s to b.

    >>> p = ProblemDef.from_strings(2, ["0", "0"], [0, 1])
    >>> v = cauchy_solution(p, 0.0, 0.25)
    >>> round(float(v(0.75)[0]), 12)
    0.5
    """
    if not p.a < s < p.b:
        raise ValueError(f"s must lie in the open interval ({p.a}, {p.b}), got {s!r}")
    g = g or GridSpec()
    y0 = np.zeros(p.n)
    y0[-1] = 1.0
    dense = integrate_states(p, M, s, y0, g)
    t = np.linspace(s, p.b, g.nodes)
    states = dense(t)
    states[0] = y0
    return CauchyTrajectory(float(s), t, states, dense)


@dataclass(frozen=True)
class GreenGrid:
    """Samples of g_{M,k}(t, s) on a t-grid including a, b and interior s-nodes.

    ``derivs[d, i, j]`` is the d-th t-derivative of g at (t[i], s[j]) and
    ``g = derivs[0]``.  ``weights`` are the widths of the cells around the
    s-nodes; for the default midpoint nodes this is the composite midpoint rule.
    """

    M: float
    k: int
    n: int
    a: float
    b: float
    t: np.ndarray
    s: np.ndarray
    weights: np.ndarray
    derivs: np.ndarray = field(repr=False)
    p_values: np.ndarray = field(repr=False)
    bc_residuals: np.ndarray = field(repr=False)  # per s-node
    jumps: np.ndarray = field(repr=False)  # (n-1)-th derivative jump at t = s, per s-node

    @property
    def g(self) -> np.ndarray:
        return self.derivs[0]

    @property
    def parity(self) -> str:
        return "even" if (self.n - self.k) % 2 == 0 else "odd"

    def apply(self, sigma) -> np.ndarray:
        """Approximate u(t) = integral of g(t, s) sigma(s) ds on the t-nodes.

        ``sigma`` is a callable or an array of values at the s-nodes.
        """
        vals = sigma(self.s) if callable(sigma) else np.asarray(sigma, dtype=float)
        return self.g @ (self.weights * vals)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "s", "g"])
            for i, t in enumerate(self.t):
                for j, s in enumerate(self.s):
                    w.writerow([repr(float(t)), repr(float(s)), repr(float(self.g[i, j]))])


def _boundary_matrix(fs: FundamentalSystem, k: int) -> np.ndarray:
    # rows: orders 0..k-1 at a, then orders 0..n-k-1 at b
    n = fs.n
    return np.concatenate([fs.states[0, :k, :], fs.states[-1, : n - k, :]], axis=0)


def _boundary_conditioning(A: np.ndarray, col_scale: np.ndarray) -> float:
    """Reciprocal condition number of A with solutions scaled by size and rows normalized.

    Near 0 when some solution meets all boundary conditions up to rounding
    relative to its own magnitude.  The smallest singular value is used
    rather than the determinant, which several moderately small singular
    values can push down without any eigenvalue nearby.
    """
    B = A / np.where(col_scale > 0, col_scale, 1.0)[None, :]
    rows = np.linalg.norm(B, axis=1)
    if np.any(rows == 0):
        return 0.0
    sv = np.linalg.svd(B / rows[:, None], compute_uv=False)
    return float(sv[-1] / sv[0])


def build_green(
    p: ProblemDef,
    M: float,
    k: int,
    mesh: int = DEFAULT_MESH,
    g: Optional[GridSpec] = None,
    fs: Optional[FundamentalSystem] = None,
    t_nodes=None,
    s_nodes=None,
) -> GreenGrid:
    """Assemble g_{M,k} on a mesh x mesh grid.

    By default the t-nodes are equispaced on [a, b] and the s-nodes are the
    midpoints of ``mesh`` equal cells, so none of them touches the boundary.
    Either set can be overridden; s-nodes must lie in (a, b) and their
    quadrature weights are then the widths of the surrounding cells.

    Raises:
        SingularBoundaryError: T_n[M] is not invertible on X_k (M is an eigenvalue location).
    """
    n = p.n
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must lie in 1..{n - 1}, got {k!r}")
    if mesh < 4:
        raise ValueError(f"mesh must be at least 4, got {mesh!r}")
    t = np.linspace(p.a, p.b, mesh) if t_nodes is None else np.asarray(t_nodes, dtype=float)
    if s_nodes is None:
        h = p.length / mesh
        s = p.a + h * (np.arange(mesh) + 0.5)
        weights = np.full(mesh, h)
    else:
        s = np.sort(np.asarray(s_nodes, dtype=float))
        if s.size == 0 or s[0] <= p.a or s[-1] >= p.b:
            raise ValueError("s-nodes must lie in the open interval (a, b)")
        edges = np.concatenate([[p.a], 0.5 * (s[1:] + s[:-1]), [p.b]])
        weights = np.diff(edges)
    g = g or GridSpec()
    if fs is None:
        fs = integrate_fundamental(p, M, g)

    A = _boundary_matrix(fs, k)
    # only the derivative orders that enter the boundary rows set a solution's size
    rcond = _boundary_conditioning(A, np.abs(fs.states[:, : max(k, n - k), :]).max(axis=(0, 1)))
    if not rcond > SINGULAR_FACTOR * g.rtol:
        raise SingularBoundaryError(k, float(M), rcond)

    phi_t = fs.state_at(t)  # (nt, n, n)
    phi_t[t == p.a] = fs.states[0]
    phi_t[t == p.b] = fs.states[-1]
    phi_s = fs.state_at(s)
    ns = len(s)

    # v(., s) = Phi(.) x(s) with Phi(s) x(s) = e_n
    e_last = np.zeros((ns, n))
    e_last[:, -1] = 1.0
    x = np.linalg.solve(phi_s, e_last[..., None])[..., 0]  # (ns, n)

    # c holds the coefficients on t < s and d = c + x those on t >= s.  Solving
    # for d makes the a-rows exact (they pick entries of x) and keeps the
    # b-rows off the cancelling sum Phi(b) c + Phi(b) x.
    rhs = np.zeros((ns, n))
    rhs[:, :k] = (fs.states[0, :k, :] @ x.T).T
    d = np.linalg.solve(A, rhs.T).T  # (ns, n)
    c = d - x
    phi_b = fs.states[-1]

    coef = np.where((t[:, None] >= s[None, :])[:, :, None], d[None, :, :], c[None, :, :])  # (t, s, n)
    derivs = np.einsum("tdj,tsj->dts", phi_t, coef)

    # boundary defects relative to each derivative's size along the column
    at_a = fs.states[0] @ c.T  # (n, s)
    at_b = phi_b @ d.T
    scale = np.maximum(np.abs(derivs).max(axis=1), np.maximum(np.abs(at_a), np.abs(at_b)))
    scale = np.where(scale > 0, scale, 1.0)
    bc = np.maximum(
        (np.abs(at_a[:k]) / scale[:k]).max(axis=0),
        (np.abs(at_b[: n - k]) / scale[: n - k]).max(axis=0),
    )
    jumps = np.einsum("sj,sj->s", phi_s[:, -1, :], x)

    p_values = (t - p.a) ** k * (t - p.b) ** (n - k)
    p_values[(t == p.a) | (t == p.b)] = 0.0
    return GreenGrid(float(M), k, n, p.a, p.b, t, s, weights, derivs, p_values, bc, jumps)


@dataclass(frozen=True)
class SignReport:
    k: int
    M: float
    parity: str
    passed: bool
    worst: float  # largest normalized violation, 0 when none
    t_worst: Optional[float]
    s_worst: Optional[float]
    check: Optional[str]  # "product" (g*p >= 0) or "ratio" (g/p > 0)
    tol: float

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "M": self.M,
            "parity": self.parity,
            "pass": self.passed,
            "worst_violation": self.worst,
            "t": self.t_worst,
            "s": self.s_worst,
            "check": self.check,
            "tol": self.tol,
        }


def verify_sign(gg: GreenGrid, tol: float = DEFAULT_SIGN_TOL) -> SignReport:
    """Check g(t,s) p(t) >= 0 on the grid and g(t,s)/p(t) > 0 on interior nodes.

    The product is measured relative to max|g| * max|p|.  A node where the
    ratio is not positive counts as a violation of size |g|/max|g|, so that
    values lost in rounding near the boundary do not flag a failure.
    """
    G = gg.g
    P = gg.p_values[:, None]
    gmax = float(np.abs(G).max())
    pmax = float(np.abs(P).max())
    if gmax == 0.0 or pmax == 0.0:
        return SignReport(gg.k, gg.M, gg.parity, False, np.inf, None, None, "product", tol)

    product = -(G / gmax) * (P / pmax)
    interior = np.abs(P) > _P_FLOOR * pmax
    bad_ratio = interior & (G * np.sign(P) <= 0.0)
    ratio = np.where(bad_ratio, np.abs(G) / gmax, 0.0)

    i1 = np.unravel_index(np.argmax(product), product.shape)
    i2 = np.unravel_index(np.argmax(ratio), ratio.shape)
    v1, v2 = float(product[i1]), float(ratio[i2])
    if bad_ratio.any() and v2 >= v1:
        worst, idx, check = v2, i2, "ratio"
    elif v1 > 0.0:
        worst, idx, check = v1, i1, "product"
    else:
        return SignReport(gg.k, gg.M, gg.parity, True, 0.0, None, None, None, tol)
    passed = worst <= tol
    return SignReport(
        gg.k, gg.M, gg.parity, passed, worst, float(gg.t[idx[0]]), float(gg.s[idx[1]]), check, tol
    )

"""Closest-to-zero eigenvalues of T_n[M_ref] on X_k and the disconjugacy interval.

The (k, n-k) problem for T_n[M] has a nontrivial solution exactly when
W^n_{n-k}[M](b) = 0, so the eigenvalues of T_n[M_ref] on X_k are the
numbers lambda = M_ref - M at the zeros M of the characteristic function
M -> W^n_{n-k}[M](b).  Zeros are bracketed by scanning M away from M_ref
and then polished with Brent's method.

With lambda_1 the smallest positive eigenvalue over the k with n-k even
(+inf when n = 2) and lambda_2 the largest negative one over the k with
n-k odd, T_n[M] u = 0 is disconjugate on [a, b] if and only if M lies in
(M_ref - lambda_1, M_ref - lambda_2).
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import InconclusiveScanError, MultiplicityError, NotDisconjugateError, TangentialZeroWarning
from .odecore import GridSpec, ProblemDef, endpoint_states, integrate_fundamental
from .wronskian import is_disconjugate

__all__ = [
    "EigenRecord",
    "DisconjugacyInterval",
    "characteristic",
    "normalized_characteristic",
    "closest_eigenvalues",
    "spectrum",
    "disconjugacy_interval",
    "interval_from_spectrum",
    "eigenfunction_samples",
    "default_radius",
    "default_step",
]

GROWTH = 0.02  # scan spacing grows with the distance from M_ref by this fraction
EIGEN_RTOL = 1e-10  # relative tolerance on M for Brent polishing
SCAN_RTOL = 1e-8  # integrator tolerance while only signs are needed
_BATCH_SPREAD = 4.0  # a batch covers at most this factor in distance
_BATCH_MAX = 256
_TANGENT_PREFILTER = 1e-3
_TANGENT_ZERO = 1e-9
_MULTIPLICITY = 1e-8

DOWN = "positive"  # scanning M below M_ref finds positive eigenvalues
UP = "negative"


def default_radius(p: ProblemDef) -> float:
    """10^6 on a unit interval; the eigenvalues of u^(n) scale like (b-a)^-n."""
    return 1e6 / p.length**p.n


def default_step(p: ProblemDef) -> float:
    return max(1.0 / p.length**p.n, 0.01 * abs(p.M_ref))


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("DISCONJ_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class EigenRecord:
    k: int
    n: int
    lam: float
    M_star: float
    t: np.ndarray = field(repr=False)
    eigenfunction: np.ndarray = field(repr=False)
    char_residual: float  # |normalized W_{n-k}[M_star](b)|
    bc_residual: float  # largest relative boundary-condition defect

    @property
    def parity(self) -> str:
        return "even" if (self.n - self.k) % 2 == 0 else "odd"

    def sign_constant(self, delta: Optional[float] = None, tol: float = 1e-8) -> bool:
        """True when no sample in (a+delta, b-delta) has the minority sign beyond ``tol``."""
        a, b = self.t[0], self.t[-1]
        if delta is None:
            delta = 1e-4 * (b - a)
        inner = (self.t > a + delta) & (self.t < b - delta)
        v = self.eigenfunction[inner]
        big = np.abs(v) > tol * np.abs(self.eigenfunction).max()
        return bool(np.all(v[big] > 0) or np.all(v[big] < 0))

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "lambda": self.lam,
            "M_star": self.M_star,
            "char_residual": self.char_residual,
            "bc_residual": self.bc_residual,
            "sign_constant": self.sign_constant(),
        }


@dataclass(frozen=True)
class DisconjugacyInterval:
    M_ref: float
    lower: float  # -inf when n == 2
    upper: float
    lambda1: float  # +inf when n == 2
    lambda2: float
    attained_k_lower: Optional[int]
    attained_k_upper: int

    @property
    def unbounded_below(self) -> bool:
        return math.isinf(self.lower)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def __contains__(self, M: float) -> bool:
        return self.lower < M < self.upper

    def to_dict(self) -> dict:
        ub = self.unbounded_below
        return {
            "lower": None if ub else self.lower,
            "unbounded_below": ub,
            "upper": self.upper,
            "lambda1": None if ub else self.lambda1,
            "lambda2": self.lambda2,
            "attained_k_lower": self.attained_k_lower,
            "attained_k_upper": self.attained_k_upper,
        }


def _check_k(p: ProblemDef, k: int) -> None:
    if not 1 <= k <= p.n - 1:
        raise ValueError(f"k must lie in 1..{p.n - 1}, got {k!r}")


def characteristic(p: ProblemDef, k: int, M: float, g: Optional[GridSpec] = None) -> float:
    """W^n_{n-k}[M](b); overflows to a signed infinity rather than raising."""
    _check_k(p, k)
    ell = p.n - k
    Y, log_scale = endpoint_states(p, [M], g)
    d = float(np.linalg.det(Y[0, :ell, :ell]))
    if d == 0.0 or log_scale[0] == 0.0:
        return d
    log_mag = math.log(abs(d)) + ell * float(log_scale[0])
    return math.copysign(math.exp(log_mag), d) if log_mag < 709.0 else math.copysign(math.inf, d)


def _normalized(Y: np.ndarray, ks) -> np.ndarray:
    # W_{n-k}(b) of Phi(b)/max|Phi(b)|: a positive multiple of the true value
    n = Y.shape[-1]
    Yn = Y / np.abs(Y).max(axis=(1, 2))[:, None, None]
    return np.stack([np.linalg.det(Yn[:, : n - k, : n - k]) for k in ks], axis=1)


def normalized_characteristic(
    p: ProblemDef, ks, Ms, g: Optional[GridSpec] = None, rtol: Optional[float] = None
) -> np.ndarray:
    """Sign-faithful, overflow-free characteristic values, shape (len(Ms), len(ks))."""
    Y, _ = endpoint_states(p, Ms, g, rtol)
    return _normalized(Y, ks)


def _distances(step: float, radius: float) -> np.ndarray:
    d = [step]
    while d[-1] < radius:
        d.append(d[-1] + max(step, GROWTH * d[-1]))
    d[-1] = radius
    return np.array(d)


@dataclass
class _Bracket:
    k: int
    index: int  # position of the far end in the distance list
    M_near: float
    M_far: float
    c_near: float
    c_far: float


def _scan(p, ks, direction, radius, step, g, first_only=False) -> dict[int, Optional[_Bracket]]:
    """Walk M away from M_ref until the characteristic of each k changes sign."""
    sgn = -1.0 if direction == DOWN else 1.0
    dist = _distances(step, radius)
    Ms = p.M_ref + sgn * dist
    pending = list(ks)
    found: dict[int, Optional[_Bracket]] = {k: None for k in ks}
    prev_M = np.array([p.M_ref])
    scan_rtol = max(SCAN_RTOL, (g or GridSpec()).rtol)
    prev_c = normalized_characteristic(p, pending, prev_M, g, scan_rtol)
    prev_c = {k: [prev_c[0, i]] for i, k in enumerate(pending)}
    prev_M = [p.M_ref]

    i = 0
    while i < len(dist) and pending:
        j = i + 1
        while j < len(dist) and j - i < _BATCH_MAX and dist[j] <= _BATCH_SPREAD * dist[i]:
            j += 1
        batch = Ms[i:j]
        values = normalized_characteristic(p, pending, batch, g, scan_rtol)
        hit_index = None
        for col, k in enumerate(list(pending)):
            cs = prev_c[k][-2:] + list(values[:, col])
            mm = prev_M[-2:] + list(batch)
            off = len(prev_c[k][-2:])
            for q in range(off, len(cs)):
                if (cs[q] > 0) != (cs[q - 1] > 0) or cs[q] == 0.0:
                    found[k] = _Bracket(k, i + q - off, mm[q - 1], mm[q], cs[q - 1], cs[q])
                    pending.remove(k)
                    hit_index = i + q - off if hit_index is None else min(hit_index, i + q - off)
                    break
                if q >= 2:
                    _tangency_check(p, k, mm[q - 2 : q + 1], cs[q - 2 : q + 1], g)
            prev_c[k] = cs[-2:]
        prev_M = (prev_M + list(batch))[-2:]
        for k in pending:
            prev_c[k] = prev_c[k][-2:]
        if first_only and hit_index is not None:
            break
        i = j
    return found


def _tangency_check(p, k, Ms, cs, g) -> None:
    # a local minimum of |c| that nearly touches zero without a sign change
    a0, a1, a2 = (abs(c) for c in cs)
    if not (a1 <= a0 and a1 <= a2 and a1 < _TANGENT_PREFILTER * max(a0, a2)):
        return
    lo, hi = min(Ms[0], Ms[2]), max(Ms[0], Ms[2])
    f = lambda M: abs(normalized_characteristic(p, [k], [M], g)[0, 0])
    xatol = EIGEN_RTOL * max(1.0, abs(lo), abs(hi))
    res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": xatol})
    if res.fun < _TANGENT_ZERO:
        warnings.warn(
            f"characteristic for k={k} touches zero without a sign change near M={float(res.x)!r}; "
            "not reported as an eigenvalue",
            TangentialZeroWarning,
            stacklevel=3,
        )


def _polish(p: ProblemDef, br: _Bracket, g: Optional[GridSpec]) -> float:
    f = lambda M: float(normalized_characteristic(p, [br.k], [M], g)[0, 0])
    lo, hi = sorted((br.M_near, br.M_far))
    flo, fhi = f(lo), f(hi)
    # the scan ran at a looser tolerance; a root hugging an end may sit just outside
    for _ in range(8):
        if (flo > 0) != (fhi > 0) or flo == 0.0 or fhi == 0.0:
            break
        width = hi - lo
        if abs(flo) < abs(fhi):
            lo, flo = lo - width, f(lo - width)
        else:
            hi, fhi = hi + width, f(hi + width)
    if flo == 0.0 or fhi == 0.0:
        return lo if flo == 0.0 else hi
    return brentq(f, lo, hi, xtol=1e-300, rtol=EIGEN_RTOL)


def _cofactors(B: np.ndarray) -> np.ndarray:
    """Expansion of det of B with its last row replaced by a variable row."""
    ell = B.shape[0]
    if ell == 1:
        return np.ones(1)
    top = B[:-1]
    return np.array(
        [(-1) ** (ell - 1 + j) * float(np.linalg.det(np.delete(top, j, axis=1))) for j in range(ell)]
    )


def eigenfunction_samples(
    p: ProblemDef, k: int, M_star: float, g: Optional[GridSpec] = None
) -> tuple[np.ndarray, np.ndarray, float]:
    """Grid samples of the (k, n-k) eigenfunction at M_star, scaled to max-abs 1.

    Built as the bordered determinant whose upper rows are the derivatives
    of orders 0..n-k-2 of y_1..y_{n-k} at b and whose last row is
    y_1(t)..y_{n-k}(t).  Returns (t, samples, bc_residual).

    Raises:
        MultiplicityError: the boundary matrix has a null space of dimension > 1.
    """
    _check_k(p, k)
    ell = p.n - k
    fs = integrate_fundamental(p, M_star, g)
    B = fs.states[-1, :ell, :ell]
    # equilibrate: derivative rows differ in magnitude by powers of the growth rate
    rows = np.linalg.norm(B, axis=1)
    Bs = B / np.where(rows > 0, rows, 1.0)[:, None]
    cols = np.linalg.norm(Bs, axis=0)
    Bs = Bs / np.where(cols > 0, cols, 1.0)[None, :]
    sv = np.linalg.svd(Bs, compute_uv=False)
    if ell >= 2 and not sv[-2] > _MULTIPLICITY * sv[0]:
        raise MultiplicityError(f"eigenvalue at M={M_star!r} for k={k} is not simple")
    coef = _cofactors(B)
    col_norms = np.linalg.norm(B, axis=0)
    if np.abs(coef).max() <= 1e-12 * np.prod(col_norms) / col_norms.min():
        # the upper rows are degenerate; fall back to the null direction
        _, _, vt = np.linalg.svd(B)
        coef = vt[-1]
    samples = fs.states[:, 0, :ell] @ coef
    scale = np.abs(samples).max()
    i = int(np.argmax(np.abs(samples)))
    samples = samples / (scale if samples[i] > 0 else -scale)

    derivs = fs.states[:, :, :ell] @ coef  # (node, order)
    scales = np.abs(derivs).max(axis=0)
    scales[scales == 0.0] = 1.0
    bc_res = max(
        float(np.max(np.abs(derivs[0, :k]) / scales[:k])),
        float(np.max(np.abs(derivs[-1, :ell]) / scales[:ell])),
    )
    return fs.t.copy(), samples, bc_res


def _resolve(args) -> EigenRecord:
    p, br, g = args
    M_star = float(_polish(p, br, g))
    t, ef, bc_res = eigenfunction_samples(p, br.k, M_star, g)
    res = abs(float(normalized_characteristic(p, [br.k], [M_star], g)[0, 0]))
    return EigenRecord(br.k, p.n, p.M_ref - M_star, M_star, t, ef, res, bc_res)


def _resolve_all(p, brackets, g) -> list[EigenRecord]:
    jobs = [(p, br, g) for br in brackets]
    workers = min(_threads(), len(jobs))
    if workers <= 1:
        return [_resolve(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_resolve, jobs))


def _require_disconjugate(p: ProblemDef, g) -> None:
    report = is_disconjugate(p, p.M_ref, g)
    if not report.disconjugate:
        raise NotDisconjugateError(report)


def spectrum(
    p: ProblemDef,
    radius: Optional[float] = None,
    step: Optional[float] = None,
    g: Optional[GridSpec] = None,
    ks=None,
    check: bool = True,
) -> dict[int, tuple[Optional[EigenRecord], Optional[EigenRecord]]]:
    """Least positive and biggest negative eigenvalue of T_n[M_ref] on X_k for each k.

    Both scans are shared by all k.  Entries are None when no sign change
    occurs within ``radius``.
    """
    if check:
        _require_disconjugate(p, g)
    radius = default_radius(p) if radius is None else radius
    step = default_step(p) if step is None else step
    if not (radius > 0 and step > 0):
        raise ValueError("radius and step must be positive")
    ks = list(range(1, p.n)) if ks is None else list(ks)
    for k in ks:
        _check_k(p, k)
    down = _scan(p, ks, DOWN, radius, step, g)
    up = _scan(p, ks, UP, radius, step, g)
    brackets = [br for k in ks for br in (down[k], up[k]) if br is not None]
    records = iter(_resolve_all(p, brackets, g))
    out = {}
    for k in ks:
        pos = next(records) if down[k] is not None else None
        neg = next(records) if up[k] is not None else None
        out[k] = (pos, neg)
    return out


def closest_eigenvalues(
    p: ProblemDef,
    k: int,
    radius: Optional[float] = None,
    step: Optional[float] = None,
    g: Optional[GridSpec] = None,
) -> tuple[Optional[EigenRecord], Optional[EigenRecord]]:
    """(least positive, biggest negative) eigenvalue records of T_n[M_ref] on X_k.

    Raises:
        NotDisconjugateError: T_n[M_ref] u = 0 is not disconjugate on [a, b].
    """
    _check_k(p, k)
    return spectrum(p, radius, step, g, ks=[k])[k]


def interval_from_spectrum(p: ProblemDef, spec: dict, radius: Optional[float] = None) -> DisconjugacyInterval:
    """Assemble the interval from per-k records (parity-selected min/max)."""
    radius = default_radius(p) if radius is None else radius
    even = [k for k in spec if (p.n - k) % 2 == 0]
    odd = [k for k in spec if (p.n - k) % 2 == 1]
    negs = [spec[k][1] for k in odd if spec[k][1] is not None]
    if not negs:
        raise InconclusiveScanError(odd, UP, radius)
    r2 = max(negs, key=lambda r: r.lam)
    if p.n == 2:
        return DisconjugacyInterval(p.M_ref, -math.inf, r2.M_star, math.inf, r2.lam, None, r2.k)
    poss = [spec[k][0] for k in even if spec[k][0] is not None]
    if not poss:
        raise InconclusiveScanError(even, DOWN, radius)
    r1 = min(poss, key=lambda r: r.lam)
    return DisconjugacyInterval(p.M_ref, r1.M_star, r2.M_star, r1.lam, r2.lam, r1.k, r2.k)


def _closest_in_class(p, ks, direction, radius, step, g) -> EigenRecord:
    found = _scan(p, ks, direction, radius, step, g, first_only=True)
    hits = [br for br in found.values() if br is not None]
    if not hits:
        raise InconclusiveScanError(ks, direction, radius)
    first = min(br.index for br in hits)
    records = _resolve_all(p, [br for br in hits if br.index == first], g)
    return min(records, key=lambda r: abs(r.lam))


def disconjugacy_interval(
    p: ProblemDef,
    radius: Optional[float] = None,
    g: Optional[GridSpec] = None,
    step: Optional[float] = None,
) -> DisconjugacyInterval:
    """The open interval of M for which T_n[M] u = 0 is disconjugate on [a, b].

    Only the directions that matter are scanned: downward over the k with
    n-k even (skipped for n = 2) and upward over the k with n-k odd, each
    stopping at the first sign change.

    Raises:
        NotDisconjugateError: M_ref itself is not a disconjugate parameter.
        InconclusiveScanError: no eigenvalue of the required parity within ``radius``.
    """
    _require_disconjugate(p, g)
    radius = default_radius(p) if radius is None else radius
    step = default_step(p) if step is None else step
    odd = [k for k in range(1, p.n) if (p.n - k) % 2 == 1]
    even = [k for k in range(1, p.n) if (p.n - k) % 2 == 0]
    r2 = _closest_in_class(p, odd, UP, radius, step, g)
    if p.n == 2:
        return DisconjugacyInterval(p.M_ref, -math.inf, r2.M_star, math.inf, r2.lam, None, r2.k)
    r1 = _closest_in_class(p, even, DOWN, radius, step, g)
    return DisconjugacyInterval(p.M_ref, r1.M_star, r2.M_star, r1.lam, r2.lam, r1.k, r2.k)

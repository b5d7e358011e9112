"""Wronskians of the canonical fundamental system and the disconjugacy test.

W_k(t) is the determinant of the k x k block of the state matrix made of
the derivatives of orders 0..k-1 of y_1..y_k.  By the canonical initial
data every W_k vanishes at a and has the sign (-1)^(k(k-1)/2) just to its
right (the columns are ordered by descending powers of t-a); the first
zero of any W_k in (a, b] is the first right conjugate point of a, so the
equation is disconjugate on [a, b] exactly when there is none.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import AmbiguousZeroError
from .odecore import DELTA_FRACTION, FundamentalSystem, GridSpec, ProblemDef, integrate_fundamental

__all__ = [
    "Zero",
    "WronskianTrace",
    "DisconjugacyReport",
    "wronskian_at",
    "wronskian_derivative_at",
    "wronskian_values",
    "first_zero",
    "find_zeros",
    "trace",
    "is_disconjugate",
    "DEFAULT_TOL",
    "leading_sign",
]

DEFAULT_TOL = 1e-9

SIGN_CHANGE = "sign-change"
TANGENTIAL = "tangential"

_REFINE = 8  # local subdivision factor around a dip
_DIP_PREFILTER = 1e-3  # only dips below this fraction of the scale are examined


class Zero(NamedTuple):
    t: float
    kind: str


@dataclass(frozen=True)
class WronskianTrace:
    k: int
    M: float
    t: np.ndarray
    values: np.ndarray
    zeros: tuple[Zero, ...]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "W"])
            for t, v in zip(self.t, self.values):
                w.writerow([repr(float(t)), repr(float(v))])


@dataclass(frozen=True)
class DisconjugacyReport:
    M: float
    disconjugate: bool
    omega: Optional[float] = None
    witness_k: Optional[int] = None
    ties: tuple[int, ...] = ()  # other k whose first zero coincides with omega

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "disconjugate": self.disconjugate,
            "omega": self.omega,
            "witness_k": self.witness_k,
            "ties": list(self.ties),
        }


def leading_sign(k: int) -> int:
    """Sign of W^n_k on a right neighborhood of a."""
    return -1 if (k * (k - 1) // 2) % 2 else 1


def _check_k(fs: FundamentalSystem, k: int) -> None:
    if not 1 <= k <= fs.n - 1:
        raise ValueError(f"k must lie in 1..{fs.n - 1}, got {k!r}")


def wronskian_at(fs: FundamentalSystem, k: int, t) -> float:
    """W^n_k[M](t) by LU with partial pivoting (LAPACK); ``t`` may be an array."""
    _check_k(fs, k)
    return np.linalg.det(fs.state_at(t)[..., :k, :k])[()]


def wronskian_derivative_at(fs: FundamentalSystem, k: int, t) -> float:
    """d/dt W^n_k: the determinant whose last row holds the order-k derivatives."""
    _check_k(fs, k)
    rows = list(range(k - 1)) + [k]
    return np.linalg.det(fs.state_at(t)[..., rows, :k])[()]


def wronskian_values(fs: FundamentalSystem, k: int) -> np.ndarray:
    """W^n_k on the sampling grid of ``fs``."""
    _check_k(fs, k)
    values = np.linalg.det(fs.states[:, :k, :k])
    values[0] = 0.0
    return values


def _bisect(fs: FundamentalSystem, k: int, lo: float, hi: float, w_lo: float, xtol: float) -> float:
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        w_mid = wronskian_at(fs, k, mid)
        if w_mid == 0.0:
            return float(mid)
        if (w_mid > 0) == (w_lo > 0):
            lo, w_lo = mid, w_mid
        else:
            hi = mid
    return float(0.5 * (lo + hi))


def _examine(fs, k, lo, hi, sign, thresh, dscale, tol, xtol) -> Optional[Zero]:
    """Decide what happens between two nodes where W has the sign ``sign``.

    W(lo) is significant.  Only values beyond ``thresh`` count as a sign
    change; a minimum of sign*W inside the noise band is a tangential zero
    when W' vanishes there too.
    """
    ts = np.linspace(lo, hi, 2 * _REFINE + 1)
    ws = wronskian_at(fs, k, ts)
    flipped = np.nonzero(ws * sign < -thresh)[0]
    if flipped.size:
        j = int(flipped[0])
        i = max(q for q in range(j) if ws[q] * sign > thresh)
        return Zero(_bisect(fs, k, ts[i], ts[j], ws[i], xtol), SIGN_CHANGE)
    i = int(np.argmin(ws * sign))
    a, b = ts[max(i - 1, 0)], ts[min(i + 1, len(ts) - 1)]
    f = lambda s: sign * wronskian_at(fs, k, s)
    c = float(minimize_scalar(f, bounds=(a, b), method="bounded", options={"xatol": xtol}).x)
    w = f(c)
    if w < -thresh:
        # a narrow excursion that the samples missed
        return Zero(_bisect(fs, k, lo, c, sign, xtol), SIGN_CHANGE)
    if w <= thresh:
        if abs(wronskian_derivative_at(fs, k, c)) <= np.sqrt(tol) * dscale:
            return Zero(c, TANGENTIAL)
        raise AmbiguousZeroError(k, c, w)
    if w <= 10 * thresh:
        raise AmbiguousZeroError(k, c, w)
    return None


def find_zeros(
    fs: FundamentalSystem,
    k: int,
    delta: Optional[float] = None,
    tol: float = DEFAULT_TOL,
    first_only: bool = False,
) -> list[Zero]:
    """Zeros of W^n_k in [a + delta, b], in increasing order.

    Values with |W| <= tol*scale are treated as zero to working accuracy.
    A sign change between significant grid values is refined by bisection
    to tol*(b-a).  A stretch of negligible values, or a local minimum of
    |W| below a small fraction of the scale, is refined locally and
    reported as a tangential zero when W' vanishes to tolerance as well.
    The forced zero at a is skipped by ignoring the leading stretch where
    |W| has not yet risen above tol*scale.
    """
    _check_k(fs, k)
    a, b = fs.a, fs.b
    length = b - a
    if delta is None:
        delta = DELTA_FRACTION * length
    if not delta > 0:
        raise ValueError("delta must be positive")
    xtol = tol * length

    t = fs.t
    w = wronskian_values(fs, k)
    keep = t > a + delta
    t = np.concatenate([[a + delta], t[keep]])
    w = np.concatenate([[wronskian_at(fs, k, a + delta)], w[keep]])
    scale = float(np.abs(w).max())
    if scale == 0.0:
        return [Zero(float(t[0]), SIGN_CHANGE)]
    thresh = tol * scale
    dscale = float(np.abs(np.diff(w)).max() / np.diff(t).min())
    aw = np.abs(w)
    sig = np.nonzero(aw > thresh)[0]

    zeros: list[Zero] = []

    def add(z: Optional[Zero]) -> bool:
        if z is not None and (not zeros or z.t > zeros[-1].t):
            zeros.append(z)
            return first_only
        return False

    start = int(sig[0])
    if w[start] * leading_sign(k) < 0:
        # the sign right of a is fixed, so W crossed inside the leading stretch
        if start == 0:
            z = Zero(float(t[0]), SIGN_CHANGE)
        else:
            z = Zero(_bisect(fs, k, t[start - 1], t[start], leading_sign(k), xtol), SIGN_CHANGE)
        if add(z):
            return zeros

    for i, j in zip(sig[:-1], sig[1:]):
        sign = 1.0 if w[i] > 0 else -1.0
        if w[j] * sign < 0:
            z = Zero(_bisect(fs, k, t[i], t[j], w[i], xtol), SIGN_CHANGE)
        elif j > i + 1:
            z = _examine(fs, k, t[i], t[j], sign, thresh, dscale, tol, xtol)
        elif (
            i > start
            and w[i - 1] * sign > thresh
            and aw[i] <= aw[i - 1]
            and aw[i] <= aw[j]
            and aw[i] < _DIP_PREFILTER * scale
        ):
            z = _examine(fs, k, t[i - 1], t[j], sign, thresh, dscale, tol, xtol)
        else:
            z = None
        if add(z):
            return zeros

    last = len(t) - 1
    if sig[-1] < last and (not zeros or zeros[-1].t < t[sig[-1]]):
        # W is negligible at b: the scan interval is closed there
        dw = abs(wronskian_derivative_at(fs, k, b))
        add(Zero(float(b), TANGENTIAL if dw <= np.sqrt(tol) * dscale else SIGN_CHANGE))
    return zeros


def first_zero(
    fs: FundamentalSystem, k: int, delta: Optional[float] = None, tol: float = DEFAULT_TOL
) -> Optional[Zero]:
    zeros = find_zeros(fs, k, delta, tol, first_only=True)
    return zeros[0] if zeros else None


def trace(fs: FundamentalSystem, k: int, delta: Optional[float] = None, tol: float = DEFAULT_TOL) -> WronskianTrace:
    return WronskianTrace(k, fs.M, fs.t.copy(), wronskian_values(fs, k), tuple(find_zeros(fs, k, delta, tol)))


def is_disconjugate(
    p: ProblemDef,
    M: float,
    g: Optional[GridSpec] = None,
    delta: Optional[float] = None,
    tol: float = DEFAULT_TOL,
    fs: Optional[FundamentalSystem] = None,
) -> DisconjugacyReport:
    """Decide whether T_n[M] u = 0 is disconjugate on [a, b].

    It is exactly when no W^n_k, k = 1..n-1, vanishes in (a, b]; otherwise
    ``omega`` is the first such zero and ``witness_k`` the smallest k
    attaining it.
    """
    if fs is None:
        fs = integrate_fundamental(p, M, g)
    firsts = {}
    for k in range(1, p.n):
        z = first_zero(fs, k, delta, tol)
        if z is not None:
            firsts[k] = z.t
    if not firsts:
        return DisconjugacyReport(float(M), True)
    omega = min(firsts.values())
    same = sorted(k for k, t in firsts.items() if abs(t - omega) <= 10 * tol * p.length)
    return DisconjugacyReport(float(M), False, float(omega), same[0], tuple(same[1:]))

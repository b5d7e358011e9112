"""Reference computations that share no code with the package.

Everything here is built on numpy/scipy directly: matrix exponentials of the
companion matrix, characteristic roots, scipy's own integrator and root
finder, and closed forms.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.optimize import brentq


def companion(coeffs_by_order, M=0.0):
    """Companion matrix of u^(n) + sum_d c_d u^(d) + M u = 0 for constant c."""
    c = np.array(coeffs_by_order, dtype=float)
    n = len(c)
    A = np.zeros((n, n))
    A[:-1, 1:] = np.eye(n - 1)
    A[-1] = -c
    A[-1, 0] -= M
    return A


def canonical(n):
    return np.fliplr(np.eye(n))


def expm_states(coeffs_by_order, M, ts, a=0.0):
    """Phi(t) for constant coefficients via the matrix exponential."""
    A = companion(coeffs_by_order, M)
    return np.stack([expm(A * (t - a)) @ canonical(len(coeffs_by_order)) for t in ts])


def root_states(coeffs_by_order, M, ts, a=0.0):
    """Phi(t) from the characteristic roots (assumed distinct).

    y(t) = sum_i C_i exp(r_i (t-a)); the derivative of order d is
    sum_i C_i r_i^d exp(r_i (t-a)).  Each canonical column fixes C by a
    Vandermonde solve.
    """
    c = np.array(coeffs_by_order, dtype=float)
    n = len(c)
    poly = np.concatenate([[1.0], c[::-1]])
    poly[-1] += M
    r = np.roots(poly).astype(complex)
    V = np.vander(r, n, increasing=True).T  # V[d, i] = r_i^d
    C = np.linalg.solve(V, canonical(n).astype(complex))  # (root, column)
    out = []
    for t in ts:
        e = np.exp(r * (t - a))
        out.append((V * e[None, :]) @ C)
    return np.real_if_close(np.stack(out), tol=1e6).real


def ivp_states(rhs_coeffs, n, M, a, b, ts, rtol=1e-12, atol=1e-14):
    """Phi(t) by scipy's DOP853 for variable coefficients.

    ``rhs_coeffs(t)`` returns the multipliers of u, u', ..., u^(n-1).
    """

    def f(t, y):
        Y = y.reshape(n, n)
        c = np.asarray(rhs_coeffs(t), dtype=float).copy()
        c[0] += M
        dY = np.empty_like(Y)
        dY[:-1] = Y[1:]
        dY[-1] = -(c @ Y)
        return dY.ravel()

    sol = solve_ivp(f, (a, b), canonical(n).ravel(), method="DOP853", t_eval=ts, rtol=rtol, atol=atol)
    assert sol.success, sol.message
    return sol.y.T.reshape(len(ts), n, n)


def det_cofactor(A):
    """Determinant by Laplace expansion along the first row."""
    A = np.asarray(A, dtype=float)
    m = A.shape[0]
    if m == 1:
        return float(A[0, 0])
    return sum((-1) ** j * A[0, j] * det_cofactor(np.delete(A[1:], j, axis=1)) for j in range(m))


# scalar equations whose roots give the classical eigenvalues on [0, 1]


def third_order_root():
    """Root near 4.23 of cos(sqrt(3) x / 2) - sqrt(3) sin(sqrt(3) x / 2) = exp(-3x/2)."""
    s3 = math.sqrt(3.0)
    f = lambda x: math.cos(s3 * x / 2) - s3 * math.sin(s3 * x / 2) - math.exp(-1.5 * x)
    return brentq(f, 3.5, 5.0, xtol=1e-15)


def clamped_root():
    """First nonzero root of cos x cosh x = 1."""
    return brentq(lambda x: math.cos(x) * math.cosh(x) - 1.0, 4.0, 5.5, xtol=1e-15)


def tan_tanh_root():
    """First positive root of tan(x/sqrt 2) = tanh(x/sqrt 2)."""
    s = math.sqrt(2.0)
    # tan has a pole at x = pi*s/2 ~ 2.22; the root sits in the next branch
    return brentq(lambda x: math.tan(x / s) - math.tanh(x / s), 4.5, 3 * math.pi * s / 2 - 1e-9, xtol=1e-15)


def w24_closed_form(t):
    """W_2 of the canonical system of u'''' + 50u'' = 0 on [0, 1]."""
    w = 5.0 * math.sqrt(2.0)
    t = np.asarray(t, dtype=float)
    return (w * t * np.sin(w * t) + 2.0 * np.cos(w * t) - 2.0) / 2500.0


def dirichlet_green(t, s):
    """Green's function of u'' on [0, 1] with u(0) = u(1) = 0."""
    t, s = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
    return np.where(t <= s, t * (s - 1.0), s * (t - 1.0))


def compose_coefficients(p_expr, roots):
    """Coefficients a_1..a_n of (D + p(t)) applied after (D - r_1)...(D - r_m), as strings.

    The inner factor L2 = D^m + b_1 D^(m-1) + ... + b_m has real roots, so it
    is disconjugate on any interval; so is every first-order factor.
    """
    b = [float(x) for x in np.poly(roots)[1:]]
    m = len(b)
    coeffs = [f"{b[0]!r} + ({p_expr})"]
    coeffs += [f"{b[i]!r} + ({p_expr})*{b[i - 1]!r}" for i in range(1, m)]
    coeffs.append(f"({p_expr})*{b[m - 1]!r}")
    return coeffs


def characteristic_expm(coeffs_by_order, k, M, a=0.0, b=1.0):
    """W_{n-k}[M](b) from the matrix exponential, scaled to max |Phi(b)| = 1."""
    n = len(coeffs_by_order)
    Phi = expm_states(coeffs_by_order, M, [b], a)[0]
    Phi = Phi / np.abs(Phi).max()
    ell = n - k
    return float(np.linalg.det(Phi[:ell, :ell]))


def eigen_expm(coeffs_by_order, k, lo, hi):
    """Root in M of the expm characteristic on [lo, hi]."""
    return brentq(lambda M: characteristic_expm(coeffs_by_order, k, M), lo, hi, xtol=1e-12)

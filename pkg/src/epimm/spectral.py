"""Mean-growth generator, next-generation matrix and their Perron roots.

The dominant eigenvalue of a Metzler matrix ``A`` is found by power
iteration on the nonnegative shift ``B = A + s I``. Iterates are advanced
by repeated squaring of ``B`` (so ``k`` steps cover ``2**k`` plain power
steps) and convergence is certified by the Collatz-Wielandt bracket
``min_i (Bv)_i / v_i <= rho(B) <= max_i (Bv)_i / v_i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numba import njit

from .core import (
    ModelParams,
    _strongly_connected,
    as_generator,
    as_simplex,
)
from .errors import (
    DimensionMismatch,
    NoConvergence,
    NotIrreducible,
    SingularResidenceMatrix,
)

EIG_TOL = 1e-12
MAX_ITER = 100_000
RESIDUAL_TOL = 1e-10
UNIFORMIZATION_TAIL = 1e-12
# largest s*t handled in one uniformization pass; keeps exp(-s t) well above underflow
_MAX_POISSON_MEAN = 30.0


@dataclass(frozen=True, eq=False)
class SpectralPair:
    """Dominant eigenvalue with right (``right``) and left (``left``) eigenvectors.

    Normalised so that ``max(right) == 1`` and ``right @ left == 1``.
    """

    value: float
    right: np.ndarray
    left: np.ndarray
    iterations: int = 0


@njit(cache=True)
def _cw_bracket(B, v):
    m = B.shape[0]
    lo = np.inf
    hi = -np.inf
    for i in range(m):
        if v[i] > 0.0:
            s = 0.0
            for j in range(m):
                s += B[i, j] * v[j]
            r = s / v[i]
            if r < lo:
                lo = r
            if r > hi:
                hi = r
    return lo, hi


@njit(cache=True)
def _power_squaring(B, tol, max_iter):
    """Perron root and right vector of a nonnegative matrix.

    Returns (rho, v, iterations); iterations == -1 signals budget exhaustion.
    """
    m = B.shape[0]
    v = np.full(m, 1.0 / m)
    lo, hi = _cw_bracket(B, v)
    if hi - lo <= tol * abs(hi):
        return 0.5 * (lo + hi), v, 0
    P = B.copy()
    extra = 0
    it = 0
    while it < max_iter:
        it += 1
        # v = P @ 1 with P ~ B^(2^(it-1))
        for i in range(m):
            s = 0.0
            for j in range(m):
                s += P[i, j]
            v[i] = s
        vmax = v.max()
        if vmax <= 0.0:
            return np.nan, v, -1
        v /= vmax
        lo, hi = _cw_bracket(B, v)
        if hi - lo <= tol * abs(hi):
            # one more squaring pushes the bracket to rounding level
            if extra == 1 or hi - lo == 0.0:
                return 0.5 * (lo + hi), v, it
            extra = 1
        P = P @ P
        pmax = P.max()
        if pmax <= 0.0 or not np.isfinite(pmax):
            return np.nan, v, -1
        P /= pmax
    return 0.5 * (lo + hi), v, -1


def _shift(A):
    return 1.0 + np.max(np.abs(np.diag(A)))


def _tau_value(beta, gamma, pi, Q):
    """Dominant eigenvalue of A = diag(beta*pi - gamma) + Q on raw arrays (no validation)."""
    A = Q + np.diag(beta * pi - gamma)
    s = _shift(A)
    rho, _, it = _power_squaring(A + s * np.eye(A.shape[0]), EIG_TOL, MAX_ITER)
    if it < 0:
        raise NoConvergence("power iteration did not converge", last=rho - s)
    return rho - s


def _lambda_matrix(beta, gamma, pi, Q):
    M = np.diag(gamma) - Q
    try:
        lu = scipy.linalg.lu_factor(M, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularResidenceMatrix(str(exc)) from exc
    diag = np.abs(np.diag(lu[0]))
    if diag.min() <= np.finfo(float).eps * max(diag.max(), 1.0) * M.shape[0]:
        raise SingularResidenceMatrix("diag(gamma) - Q is singular")
    return scipy.linalg.lu_solve(lu, np.diag(beta * pi), check_finite=False)


def _r0_value(beta, gamma, pi, Q):
    L = _lambda_matrix(beta, gamma, pi, Q)
    rho, _, it = _power_squaring(np.maximum(L, 0.0), EIG_TOL, MAX_ITER)
    if it < 0:
        raise NoConvergence("power iteration did not converge", last=rho)
    return rho


def _check_dims(params, pi, Q):
    m = params.m
    if pi.m != m or Q.m != m:
        raise DimensionMismatch(
            f"params have {m} groups, pi has {pi.m}, Q is {Q.m}x{Q.m}"
        )


def _prepare(params, pi, Q, irreducible=True):
    pi = as_simplex(pi)
    Q = as_generator(Q)
    _check_dims(params, pi, Q)
    if irreducible and not Q.irreducible:
        raise NotIrreducible("Q must be irreducible")
    return pi, Q


def build_A(params: ModelParams, pi, Q) -> np.ndarray:
    """Generator of the mean matrix semigroup, ``diag(beta) diag(pi) - diag(gamma) + Q``."""
    pi, Q = _prepare(params, pi, Q, irreducible=False)
    return Q.rates + np.diag(params.beta * pi.probs - params.gamma)


def perron(A, tol: float = EIG_TOL, max_iter: int = MAX_ITER) -> SpectralPair:
    """Dominant eigenvalue and positive eigenvectors of an irreducible Metzler matrix.

    Raises
    ------
    NotIrreducible
        If the off-diagonal pattern of ``A`` is not strongly connected.
    NoConvergence
        If the bracket does not close within ``max_iter`` squarings, or the
        final residuals exceed ``1e-10 * ||A||_inf``.
    """
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got {A.shape}")
    m = A.shape[0]
    off = A[~np.eye(m, dtype=bool)]
    if np.any(off < 0):
        raise ValueError("matrix is not Metzler (negative off-diagonal entry)")
    if not _strongly_connected(A):
        raise NotIrreducible("matrix is reducible")

    s = _shift(A)
    B = A + s * np.eye(m)
    rho, v, it_r = _power_squaring(B, tol, max_iter)
    rho_l, w, it_l = _power_squaring(np.ascontiguousarray(B.T), tol, max_iter)
    if it_r < 0 or it_l < 0:
        raise NoConvergence("power iteration budget exhausted", last=rho - s)

    value = rho - s
    v = v / v.max()
    w = w / (v @ w)
    norm = np.abs(A).sum(axis=1).max()
    scale = max(norm, np.finfo(float).tiny)
    res_r = np.abs(A @ v - value * v).max()
    res_l = np.abs(w @ A - value * w).max() / np.abs(w).max()
    if res_r > RESIDUAL_TOL * scale or res_l > RESIDUAL_TOL * scale:
        raise NoConvergence(
            f"eigen-residuals too large (right {res_r:.3g}, left {res_l:.3g})",
            last=value,
        )
    return SpectralPair(value=float(value), right=v, left=w, iterations=it_r + it_l)


def tau(params: ModelParams, pi, Q) -> float:
    """Expected exponential growth rate of the infective population."""
    pi, Q = _prepare(params, pi, Q)
    return float(_tau_value(params.beta, params.gamma, pi.probs, Q.rates))


def tau_gradient(params: ModelParams, pi, Q) -> np.ndarray:
    """Partial derivatives of ``tau`` in ``pi``: ``beta_i w_i v_i / (w . v)``."""
    pi, Q = _prepare(params, pi, Q)
    sp = perron(build_A(params, pi, Q))
    return params.beta * sp.left * sp.right / (sp.left @ sp.right)


def build_Lambda(params: ModelParams, pi, Q) -> np.ndarray:
    """Next-generation matrix ``(diag(gamma) - Q)^-1 diag(beta) diag(pi)``.

    Entry ``(i, j)`` is the expected number of infections in group ``j``
    caused by one infective first infected in group ``i``.
    """
    pi, Q = _prepare(params, pi, Q)
    if not np.any(params.gamma > 0):
        raise SingularResidenceMatrix("all recovery rates are zero")
    return _lambda_matrix(params.beta, params.gamma, pi.probs, Q.rates)


def r0(params: ModelParams, pi, Q) -> float:
    """Basic reproduction number, the spectral radius of the next-generation matrix."""
    L = build_Lambda(params, pi, Q)
    rho, _, it = _power_squaring(np.maximum(L, 0.0), EIG_TOL, MAX_ITER)
    if it < 0:
        raise NoConvergence("power iteration did not converge", last=rho)
    return float(rho)


def expm_uniformized(A, t: float, tail: float = UNIFORMIZATION_TAIL) -> np.ndarray:
    """``exp(A t)`` for a Metzler matrix by uniformization.

    With ``c`` the largest row sum of ``A``, the matrix ``A - c I`` has
    nonpositive row sums, so ``P = (A - c I + s I) / s`` is substochastic
    and ``exp(At) = e^{ct} sum_k Pois(k; s t) P^k``. Every term is
    nonnegative and the truncation error is at most the Poisson tail mass
    (times ``e^{ct}``). Long horizons are split into pieces with
    ``s t <= 30`` and multiplied together.
    """
    A = np.asarray(A, dtype=float)
    if t < 0:
        raise ValueError("t must be nonnegative")
    m = A.shape[0]
    if t == 0:
        return np.eye(m)
    c = A.sum(axis=1).max()
    s = float(np.max(c - np.diag(A)))
    if s <= 0.0:
        # A is c times the identity
        return np.exp(c * t) * np.eye(m)
    pieces = max(1, int(np.ceil(s * t / _MAX_POISSON_MEAN)))
    h = t / pieces
    lam = s * h
    P = (A + (s - c) * np.eye(m)) / s
    weight = np.exp(-lam)
    term = np.eye(m)
    out = weight * term
    mass = weight
    k = 0
    while 1.0 - mass >= tail and k < 10_000:
        k += 1
        weight *= lam / k
        term = term @ P
        out += weight * term
        mass += weight
    return np.linalg.matrix_power(np.exp(c * h) * out, pieces)


def mean_matrix(params: ModelParams, pi, Q, t: float) -> np.ndarray:
    """Mean matrix ``M(t) = exp(A(pi, Q) t)`` of the branching process."""
    A = build_A(params, pi, Q)
    if not as_generator(Q).irreducible:
        raise NotIrreducible("Q must be irreducible")
    return expm_uniformized(A, t)

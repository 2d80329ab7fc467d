"""Extinction probabilities and expected total size of the branching process."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import InfectiveState, ModelParams
from .errors import DegenerateGroup, NoConvergence
from .spectral import _power_squaring, _prepare, _tau_value, build_Lambda, EIG_TOL, MAX_ITER

FIXED_POINT_TOL = 1e-13
FIXED_POINT_MAX_ITER = 10_000_000
CRITICAL_BAND = 1e-10


@dataclass(frozen=True)
class Infinite:
    """Marker for an infinite expected total size; ``rho`` is the computed R0."""

    rho: float


@dataclass(frozen=True, eq=False)
class OutcomeReport:
    q: np.ndarray
    total_size: np.ndarray | Infinite
    supercritical: bool


def _pgf_parts(params, pi, Q):
    off = Q.rates.copy()
    np.fill_diagonal(off, 0.0)
    birth = params.beta * pi.probs
    den = off.sum(axis=1) + birth + params.gamma
    if np.any(den <= 0):
        i = int(np.flatnonzero(den <= 0)[0])
        raise DegenerateGroup(f"group {i} has no events (all rates zero)")
    return off, birth, params.gamma, den


def pgf_eval(params: ModelParams, pi, Q, u) -> np.ndarray:
    """Offspring generating function ``g(u)`` of the embedded jump chain.

    An infective in group ``i`` either migrates to ``j`` (one infective in
    ``j``), infects (two in ``i``) or recovers (none), with probabilities
    proportional to ``Q_ij``, ``beta_i pi_i`` and ``gamma_i``.
    """
    pi, Q = _prepare(params, pi, Q, irreducible=False)
    u = np.asarray(u, dtype=float)
    if u.shape != (params.m,):
        raise ValueError(f"u must have shape ({params.m},)")
    if np.any(u < 0) or np.any(u > 1):
        raise ValueError("u must lie in [0, 1]^m")
    off, birth, gamma, den = _pgf_parts(params, pi, Q)
    return (off @ u + birth * u * u + gamma) / den


def extinction_probs(
    params: ModelParams,
    pi,
    Q,
    tol: float = FIXED_POINT_TOL,
    max_iter: int = FIXED_POINT_MAX_ITER,
) -> np.ndarray:
    """Extinction probability by starting group (smallest fixed point of ``g``).

    Iterates ``u <- g(u)`` from ``u = 0``; the iterates increase
    monotonically to the smallest fixed point. When the growth rate is not
    positive the answer is exactly one and no iteration is done.

    Raises
    ------
    NoConvergence
        Budget exhausted; ``exc.last`` is a lower bound on ``q``.
    """
    pi, Q = _prepare(params, pi, Q)
    off, birth, gamma, den = _pgf_parts(params, pi, Q)
    if _tau_value(params.beta, params.gamma, pi.probs, Q.rates) <= 0:
        return np.ones(params.m)
    a = off / den[:, None]
    b = birth / den
    c = gamma / den
    u = np.zeros(params.m)
    for it in range(max_iter):
        nxt = a @ u + b * u * u + c
        if np.max(np.abs(nxt - u)) < tol:
            return nxt
        u = nxt
    raise NoConvergence(
        "extinction fixed-point iteration did not converge", last=u, iterations=max_iter
    )


def extinction_prob_from_state(q, y0) -> float:
    """Probability that the process started from ``y0`` dies out, ``prod q_i^y_i``."""
    q = np.asarray(q, dtype=float)
    y = y0.counts if isinstance(y0, InfectiveState) else np.asarray(y0, dtype=np.int64)
    return float(np.prod(q**y))


def expected_total_size(params: ModelParams, pi, Q) -> np.ndarray | Infinite:
    """Expected number ever infected, starting from one infective in each group.

    Equals ``(I - Lambda)^-1 1`` when R0 < 1; otherwise :class:`Infinite`.
    """
    L = build_Lambda(params, pi, Q)
    rho, _, it = _power_squaring(np.maximum(L, 0.0), EIG_TOL, MAX_ITER)
    if it < 0:
        raise NoConvergence("spectral radius iteration did not converge", last=rho)
    if rho >= 1.0 - CRITICAL_BAND:
        return Infinite(float(rho))
    m = params.m
    return np.linalg.solve(np.eye(m) - L, np.ones(m))


def outcome_report(params: ModelParams, pi, Q) -> OutcomeReport:
    pi, Q = _prepare(params, pi, Q)
    t = _tau_value(params.beta, params.gamma, pi.probs, Q.rates)
    return OutcomeReport(
        q=extinction_probs(params, pi, Q),
        total_size=expected_total_size(params, pi, Q),
        supercritical=bool(t > 0),
    )

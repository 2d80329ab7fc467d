"""Closed-form susceptible distributions and adversarial infective migration.

``chi`` and ``omega`` are the saddle values of the growth rate and of R0.
The growth-optimal distribution ``pi*`` equalises ``beta_i pi_i - gamma_i``
across groups; the R0-optimal distribution ``pi~`` equalises
``beta_i pi_i / gamma_i``. Both are answered by the same adversarial
migration pattern, whose off-diagonal rate into group ``j`` is ``1/beta_j``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import (
    GeneratorMatrix,
    ModelParams,
    SimplexPoint,
    as_generator,
    as_simplex,
    generator_from_offdiag,
    stationary_distribution,
)
from .errors import (
    AllRecoveryZero,
    ConditionViolated,
    IrreducibilityLost,
    NotIrreducible,
    OneWayEdge,
    ValidationError,
    ZeroRecoveryGroup,
)

CONDITION_MARGIN = 1e-12


def chi(params: ModelParams) -> float:
    """Saddle value of the growth rate, ``(1 - sum gamma/beta) / sum(1/beta)``."""
    b, g = params.beta, params.gamma
    return float((1.0 - np.sum(g / b)) / np.sum(1.0 / b))


def omega(params: ModelParams) -> float:
    """Saddle value of R0, ``1 / sum(gamma/beta)``."""
    s = float(np.sum(params.gamma / params.beta))
    if s == 0.0:
        raise AllRecoveryZero("omega is undefined when every recovery rate is zero")
    return 1.0 / s


def condition_status(params: ModelParams) -> tuple[str, tuple[int, ...]]:
    """Classify the growth-optimal condition ``gamma_i > -chi``.

    Returns ``("interior", ())``, ``("boundary", groups)`` with the groups
    where ``gamma_i == -chi`` to within 1e-12, or ``("violated", ())``.
    """
    c = chi(params)
    slack = params.gamma + c
    if np.all(slack > CONDITION_MARGIN):
        return "interior", ()
    if np.any(slack < -CONDITION_MARGIN):
        return "violated", ()
    return "boundary", tuple(int(i) for i in np.flatnonzero(slack <= CONDITION_MARGIN))


def tau_optimal_pi(params: ModelParams) -> SimplexPoint | None:
    """Growth-rate minimising distribution ``(gamma_i + chi) / beta_i``.

    Returns ``None`` when some ``gamma_i < -chi``; no interior minimiser
    of that form exists then. In the boundary case the flagged groups get
    exact zeros.
    """
    status, boundary = condition_status(params)
    if status == "violated":
        return None
    p = (params.gamma + chi(params)) / params.beta
    if boundary:
        p[list(boundary)] = 0.0
    return SimplexPoint(p / p.sum())


def epsilon_saddle_pi(params: ModelParams, eps: float) -> SimplexPoint:
    """Interior distribution that is within ``eps`` of the growth-rate saddle.

    Each entry is ``(gamma_i + eps + chi) / beta_i``; the vector sums to
    ``1 + eps * sum(1/beta)`` and is rescaled onto the simplex.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    c = chi(params)
    if np.any(params.gamma + c < -CONDITION_MARGIN):
        raise ConditionViolated("some gamma_i < -chi; no epsilon-saddle of this form")
    raw = epsilon_saddle_raw(params, eps)
    return SimplexPoint(raw / raw.sum())


def epsilon_saddle_raw(params: ModelParams, eps: float) -> np.ndarray:
    """The unnormalised vector ``(gamma_i + eps + chi) / beta_i``."""
    return (params.gamma + eps + chi(params)) / params.beta


def r0_optimal_pi(params: ModelParams) -> SimplexPoint:
    """R0 minimising distribution ``(gamma_i / beta_i) * omega``."""
    if np.any(params.gamma == 0):
        raise ZeroRecoveryGroup(
            "a group with zero recovery rate puts the R0 optimum on the boundary"
        )
    p = params.gamma / params.beta * omega(params)
    return SimplexPoint(p / p.sum())


def adversarial_Q(params: ModelParams, scale: float = 1.0) -> GeneratorMatrix:
    """Infective migration pattern with rate ``scale / beta_j`` into group ``j``."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    m = params.m
    off = np.tile(scale / params.beta, (m, 1))
    return generator_from_offdiag(off)


def border_controls(R, target, warn: bool = True) -> np.ndarray:
    """Admittance probabilities that make ``target`` stationary for ``R``.

    ``p[i, j]`` is the probability that an individual moving from group
    ``i`` to group ``j`` is admitted. For each pair with rates in both
    directions the more restrictive side is throttled and the other kept
    at 1, so that ``R_ij p_ij target_i = R_ji p_ji target_j``. Edges with
    no reverse rate are closed (``p = 0``) with a :class:`OneWayEdge`
    warning. Diagonal entries are 1.
    """
    R = as_generator(R)
    target = as_simplex(target)
    if not R.irreducible:
        raise NotIrreducible("R must be irreducible")
    if not target.interior:
        raise ValidationError("target distribution must be interior")
    if target.m != R.m:
        raise ValidationError("target and R disagree on the number of groups")
    G, t = R.rates, target.probs
    m = R.m
    p = np.ones((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            fwd, back = G[i, j], G[j, i]
            if fwd > 0 and back > 0:
                p[i, j] = min(1.0, back * t[j] / (fwd * t[i]))
                p[j, i] = min(1.0, fwd * t[i] / (back * t[j]))
            elif fwd > 0 or back > 0:
                if warn:
                    warnings.warn(
                        f"one-way migration between groups {i} and {j} closed",
                        OneWayEdge,
                        stacklevel=2,
                    )
                p[i, j] = 0.0 if fwd > 0 else 1.0
                p[j, i] = 0.0 if back > 0 else 1.0
    controlled = controlled_generator(R, p)
    if not controlled.irreducible:
        raise IrreducibilityLost("closing one-way edges disconnected the groups")
    return p


def controlled_generator(R, p) -> GeneratorMatrix:
    """Migration generator after border controls, ``R'_ij = R_ij p_ij``."""
    R = as_generator(R)
    return generator_from_offdiag(R.rates * np.asarray(p, dtype=float))


@dataclass(frozen=True, eq=False)
class StrategyReport:
    chi: float
    omega: float | None
    tau_optimal_pi: SimplexPoint | None
    r0_optimal_pi: SimplexPoint | None
    adversarial_Q: GeneratorMatrix
    condition_ok: bool
    boundary_groups: tuple[int, ...] = field(default=())
    border_controls: np.ndarray | None = None


def strategy_report(params: ModelParams, R=None) -> StrategyReport:
    """Collect the closed-form strategies for ``params``.

    If a susceptible migration matrix ``R`` is given, the border controls
    steering it to the growth-optimal distribution are included (or to the
    R0-optimal one when the growth condition fails).
    """
    status, boundary = condition_status(params)
    try:
        om = omega(params)
    except AllRecoveryZero:
        om = None
    try:
        pt = r0_optimal_pi(params)
    except ZeroRecoveryGroup:
        pt = None
    ps = tau_optimal_pi(params)
    controls = None
    if R is not None:
        target = ps if ps is not None and ps.interior else pt
        if target is not None:
            controls = border_controls(R, target)
    return StrategyReport(
        chi=chi(params),
        omega=om,
        tau_optimal_pi=ps,
        r0_optimal_pi=pt,
        adversarial_Q=adversarial_Q(params),
        condition_ok=status == "interior",
        boundary_groups=boundary,
        border_controls=controls,
    )


def check_adversarial_stationary(params: ModelParams, Q: GeneratorMatrix) -> bool:
    """Stationary law of the adversarial pattern is proportional to ``1/beta``."""
    w = stationary_distribution(Q).probs
    target = (1.0 / params.beta) / np.sum(1.0 / params.beta)
    return bool(np.max(np.abs(w - target)) <= 1e-10)

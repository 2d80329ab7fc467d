"""Deterministic SIS metapopulation models and their disease-free linearisation.

State vectors are stacked as ``[x_1..x_m, y_1..y_m]`` (susceptible then
infective densities). Both incidence variants conserve ``sum(x) + sum(y)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp
from scipy.optimize import linear_sum_assignment

from .core import ModelParams, as_generator, stationary_distribution
from .errors import DimensionMismatch, StepSizeUnderflow
from .spectral import build_A, build_Lambda

DENSITY = "density"
FREQUENCY = "frequency"


@dataclass(frozen=True, eq=False)
class FluidState:
    x: np.ndarray
    y: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sum(self.x) + np.sum(self.y))

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.x, self.y])

    @classmethod
    def from_stacked(cls, z) -> "FluidState":
        z = np.asarray(z, dtype=float)
        m = z.shape[0] // 2
        return cls(z[:m].copy(), z[m:].copy())


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray
    x: np.ndarray  # shape (len(t), m)
    y: np.ndarray

    def state(self, k: int) -> FluidState:
        return FluidState(self.x[k], self.y[k])


def _rates(params, R, Q, state):
    R = as_generator(R).rates
    Q = as_generator(Q).rates
    m = params.m
    x = np.asarray(state.x, dtype=float)
    y = np.asarray(state.y, dtype=float)
    if R.shape != (m, m) or Q.shape != (m, m) or x.shape != (m,) or y.shape != (m,):
        raise DimensionMismatch("state, R, Q and params disagree on the number of groups")
    return R, Q, x, y


def rhs_density(params: ModelParams, R, Q, state: FluidState) -> FluidState:
    """Time derivative for density-dependent incidence ``beta_i x_i y_i``."""
    R, Q, x, y = _rates(params, R, Q, state)
    inc = params.beta * x * y
    dx = R.T @ x + params.gamma * y - inc
    dy = Q.T @ y - params.gamma * y + inc
    return FluidState(dx, dy)


def rhs_frequency(params: ModelParams, R, Q, state: FluidState) -> FluidState:
    """Time derivative for frequency-dependent incidence ``beta_i x_i y_i / (x_i + y_i)``.

    Groups with ``x_i + y_i == 0`` contribute no incidence.
    """
    R, Q, x, y = _rates(params, R, Q, state)
    n = x + y
    inc = np.zeros_like(x)
    live = n > 0
    inc[live] = params.beta[live] * x[live] * y[live] / n[live]
    dx = R.T @ x + params.gamma * y - inc
    dy = Q.T @ y - params.gamma * y + inc
    return FluidState(dx, dy)


def integrate(rhs, initial: FluidState, t_end: float, t_eval=None,
              rtol: float = 1e-8) -> Trajectory:
    """Integrate ``rhs(state) -> FluidState`` with adaptive Runge-Kutta 4(5).

    ``rhs`` is typically ``functools.partial(rhs_density, params, R, Q)``.
    Absolute tolerance is ``rtol * 1e-2``. Output is sampled at ``t_eval``
    (default: 101 evenly spaced times on ``[0, t_end]``).
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if t_eval is None:
        t_eval = np.linspace(0.0, t_end, 101)
    z0 = initial.stacked()

    def f(_t, z):
        return rhs(FluidState.from_stacked(z)).stacked()

    sol = solve_ivp(f, (0.0, t_end), z0, method="RK45", t_eval=t_eval,
                    rtol=rtol, atol=rtol * 1e-2)
    if not sol.success:
        raise StepSizeUnderflow(sol.message)
    m = z0.shape[0] // 2
    Z = sol.y.T
    return Trajectory(sol.t, Z[:, :m], Z[:, m:])


def dfe_jacobian(params: ModelParams, R, Q) -> np.ndarray:
    """Jacobian of the density model at the disease-free equilibrium ``(pi, 0)``."""
    R = as_generator(R)
    Q = as_generator(Q)
    pi = stationary_distribution(R).probs
    top = np.hstack([R.rates.T, np.diag(params.gamma - params.beta * pi)])
    bottom = np.hstack([np.zeros_like(R.rates), build_A(params, pi, Q).T])
    return np.vstack([top, bottom])


def dfe_spectrum_decomposition(params: ModelParams, R, Q):
    """Eigenvalues at the disease-free equilibrium, predicted and direct.

    Returns ``(set_A, set_R, jac)``: the spectrum of ``A(pi, Q)``, the
    spectrum of ``R`` with one zero removed, and the spectrum of the full
    ``2m x 2m`` Jacobian. The Jacobian carries one further zero eigenvalue
    (total mass is conserved), so ``jac`` matches ``set_A + set_R + [0]``.
    """
    R = as_generator(R)
    pi = stationary_distribution(R).probs
    set_A = scipy.linalg.eigvals(build_A(params, pi, Q))
    eig_R = scipy.linalg.eigvals(R.rates)
    set_R = np.delete(eig_R, np.argmin(np.abs(eig_R)))
    jac = scipy.linalg.eigvals(dfe_jacobian(params, R, Q))
    return set_A, set_R, jac


def match_spectra(a, b) -> float:
    """Largest distance under the best one-to-one pairing of two eigenvalue multisets."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        return np.inf
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max()) if a.size else 0.0


def ngm_ode(params: ModelParams, pi, Q, variant: str = DENSITY) -> np.ndarray:
    """Next-generation matrix of the ODE model.

    ``"density"`` gives the transpose of the branching-process matrix;
    ``"frequency"`` gives ``diag(beta) (diag(gamma) - Q^T)^-1``, which does
    not involve ``pi`` at all.
    """
    if variant == DENSITY:
        return build_Lambda(params, pi, Q).T
    if variant == FREQUENCY:
        Q = as_generator(Q)
        if Q.m != params.m:
            raise DimensionMismatch("Q and params disagree on the number of groups")
        M = np.diag(params.gamma) - Q.rates.T
        return np.diag(params.beta) @ np.linalg.inv(M)
    raise ValueError(f"unknown variant {variant!r}")

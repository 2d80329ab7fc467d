"""Nested numerical optimisation of the growth-rate and R0 games.

The susceptibles pick ``pi`` from the simplex (kept ``pi_floor`` away from
the faces), the infectives pick an irreducible ``Q`` whose off-diagonal
rates live in ``[q_lo, q_hi]`` and are searched in log space. The upper
game is ``inf_pi sup_Q``, the lower game ``sup_Q inf_pi``.

Inner problems run inside numba: a box-clipped Nelder-Mead for the
migration player and golden-section (two groups) or Nelder-Mead on a
softmax parameterisation (more groups) for the susceptible player.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.optimize import minimize
from scipy.stats import qmc

from .core import GeneratorMatrix, ModelParams, SimplexPoint, generator_from_offdiag
from .errors import ValidationError
from .spectral import EIG_TOL, MAX_ITER, _power_squaring

TAU = 0
R0 = 1
_Z_BOUND = 60.0
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SearchBox:
    """Compact stand-in for the unbounded strategy sets."""

    q_lo: float = 1e-6
    q_hi: float = 1e3
    pi_floor: float = 1e-9
    multistarts: int = 8
    tol: float = 1e-8
    seed: int = 20150101

    def __post_init__(self):
        if not (0 < self.q_lo < self.q_hi):
            raise ValidationError(f"need 0 < q_lo < q_hi, got {self.q_lo}, {self.q_hi}")
        if not self.pi_floor > 0:
            raise ValidationError("pi_floor must be positive")
        if self.multistarts < 1:
            raise ValidationError("multistarts must be >= 1")
        if not self.tol > 0:
            raise ValidationError("tol must be positive")

    def check(self, m: int) -> None:
        if self.pi_floor >= 1.0 / m:
            raise ValidationError(f"pi_floor must be below 1/m = {1.0 / m}")


@dataclass(frozen=True, eq=False)
class GameResult:
    """Value and maximising/minimising arguments of one order of play."""

    value: float
    pi_arg: SimplexPoint
    Q_arg: GeneratorMatrix
    evaluations: int


@dataclass(frozen=True, eq=False)
class MinimaxResult:
    inf_sup: float
    sup_inf: float
    gap: float
    pi_arg: SimplexPoint
    Q_arg: GeneratorMatrix
    evaluations: int
    upper: GameResult = field(repr=False)
    lower: GameResult = field(repr=False)


# ---------------------------------------------------------------- kernels


@njit(cache=True)
def _tau_off(beta, gamma, pi, off):
    m = beta.shape[0]
    B = off.copy()
    s = 0.0
    for i in range(m):
        row = 0.0
        for j in range(m):
            if j != i:
                row += off[i, j]
        B[i, i] = beta[i] * pi[i] - gamma[i] - row
        if abs(B[i, i]) > s:
            s = abs(B[i, i])
    s += 1.0
    for i in range(m):
        B[i, i] += s
    rho, _, it = _power_squaring(B, EIG_TOL, MAX_ITER)
    if it < 0:
        return np.nan
    return rho - s


@njit(cache=True)
def _r0_off(beta, gamma, pi, off):
    m = beta.shape[0]
    M = -off.copy()
    D = np.zeros((m, m))
    for i in range(m):
        row = 0.0
        for j in range(m):
            if j != i:
                row += off[i, j]
        M[i, i] = gamma[i] + row
        D[i, i] = beta[i] * pi[i]
    L = np.linalg.solve(M, D)
    for i in range(m):
        for j in range(m):
            if L[i, j] < 0.0:
                L[i, j] = 0.0
    rho, _, it = _power_squaring(L, EIG_TOL, MAX_ITER)
    if it < 0:
        return np.nan
    return rho


@njit(cache=True)
def _value(obj, beta, gamma, pi, off):
    if obj == 0:
        return _tau_off(beta, gamma, pi, off)
    return _r0_off(beta, gamma, pi, off)


@njit(cache=True)
def _off_from_x(x, rows, cols, m, lo, hi):
    off = np.zeros((m, m))
    for k in range(x.shape[0]):
        off[rows[k], cols[k]] = math.exp(min(max(x[k], lo), hi))
    return off


@njit(cache=True)
def _pi_from_z(z, floor):
    m = z.shape[0] + 1
    zmax = 0.0
    for k in range(m - 1):
        if z[k] > zmax:
            zmax = z[k]
    e = np.empty(m)
    tot = 0.0
    for k in range(m - 1):
        e[k] = math.exp(z[k] - zmax)
        tot += e[k]
    e[m - 1] = math.exp(-zmax)
    tot += e[m - 1]
    return floor + (1.0 - m * floor) * e / tot


@njit(cache=True)
def _objective(mode, obj, x, beta, gamma, pi, off, rows, cols, lo, hi, floor):
    # mode 0: migration player, x = log rates, minimise -value
    # mode 1: susceptible player, x = softmax logits, minimise value
    m = beta.shape[0]
    if mode == 0:
        v = _value(obj, beta, gamma, pi, _off_from_x(x, rows, cols, m, lo, hi))
        return -v if v == v else np.inf
    v = _value(obj, beta, gamma, _pi_from_z(x, floor), off)
    return v if v == v else np.inf


@njit(cache=True)
def _clip(x, lo, hi):
    for k in range(x.shape[0]):
        if x[k] < lo:
            x[k] = lo
        elif x[k] > hi:
            x[k] = hi


@njit(cache=True)
def _nelder_mead(mode, obj, x0, step, fatol, xatol, maxfev,
                 beta, gamma, pi, off, rows, cols, lo, hi, floor):
    n = x0.shape[0]
    sim = np.empty((n + 1, n))
    fs = np.empty(n + 1)
    sim[0] = x0
    _clip(sim[0], lo, hi)
    for i in range(n):
        sim[i + 1] = sim[0]
        if sim[0, i] + step <= hi:
            sim[i + 1, i] += step
        else:
            sim[i + 1, i] -= step
        _clip(sim[i + 1], lo, hi)
    nfev = 0
    for i in range(n + 1):
        fs[i] = _objective(mode, obj, sim[i], beta, gamma, pi, off, rows, cols, lo, hi, floor)
        nfev += 1

    while nfev < maxfev:
        order = np.argsort(fs)
        sim = sim[order]
        fs = fs[order]
        fspread = 0.0
        xspread = 0.0
        for i in range(1, n + 1):
            fspread = max(fspread, abs(fs[i] - fs[0]))
            for k in range(n):
                xspread = max(xspread, abs(sim[i, k] - sim[0, k]))
        if fspread <= fatol and xspread <= xatol:
            break
        c = np.zeros(n)
        for i in range(n):
            c += sim[i]
        c /= n
        worst = sim[n]
        xr = c + (c - worst)
        _clip(xr, lo, hi)
        fr = _objective(mode, obj, xr, beta, gamma, pi, off, rows, cols, lo, hi, floor)
        nfev += 1
        if fr < fs[0]:
            xe = c + 2.0 * (c - worst)
            _clip(xe, lo, hi)
            fe = _objective(mode, obj, xe, beta, gamma, pi, off, rows, cols, lo, hi, floor)
            nfev += 1
            if fe < fr:
                sim[n] = xe
                fs[n] = fe
            else:
                sim[n] = xr
                fs[n] = fr
            continue
        if fr < fs[n - 1]:
            sim[n] = xr
            fs[n] = fr
            continue
        if fr < fs[n]:
            xc = c + 0.5 * (xr - c)
            fc = _objective(mode, obj, xc, beta, gamma, pi, off, rows, cols, lo, hi, floor)
            nfev += 1
            if fc <= fr:
                sim[n] = xc
                fs[n] = fc
                continue
        else:
            xc = c - 0.5 * (c - worst)
            fc = _objective(mode, obj, xc, beta, gamma, pi, off, rows, cols, lo, hi, floor)
            nfev += 1
            if fc < fs[n]:
                sim[n] = xc
                fs[n] = fc
                continue
        for i in range(1, n + 1):
            sim[i] = sim[0] + 0.5 * (sim[i] - sim[0])
            fs[i] = _objective(mode, obj, sim[i], beta, gamma, pi, off, rows, cols, lo, hi, floor)
            nfev += 1
    best = np.argmin(fs)
    return sim[best].copy(), fs[best], nfev


@njit(cache=True)
def _sup_over_Q(obj, beta, gamma, pi, starts, rows, cols, lo, hi, fatol, xatol, maxfev):
    """Best of multistart Nelder-Mead runs; returns (value, x, nfev)."""
    dummy = np.zeros((1, 1))
    best_f = np.inf
    best_x = starts[0].copy()
    total = 0
    step = 0.1 * (hi - lo)
    for s in range(starts.shape[0]):
        x, f, nfev = _nelder_mead(0, obj, starts[s].copy(), step, fatol, xatol, maxfev,
                                  beta, gamma, pi, dummy, rows, cols, lo, hi, 0.0)
        total += nfev
        if f < best_f:
            best_f = f
            best_x = x
    _clip(best_x, lo, hi)
    return -best_f, best_x, total


@njit(cache=True)
def _golden_pi(obj, beta, gamma, off, floor, tol):
    """Minimise over pi = (t, 1 - t), t in [floor, 1 - floor]; returns (value, t, nfev)."""
    a = floor
    b = 1.0 - floor
    p = np.empty(2)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    p[0] = c
    p[1] = 1.0 - c
    fc = _value(obj, beta, gamma, p, off)
    p[0] = d
    p[1] = 1.0 - d
    fd = _value(obj, beta, gamma, p, off)
    nfev = 2
    while b - a > tol:
        if fc <= fd:
            b = d
            d = c
            fd = fc
            c = b - _INVPHI * (b - a)
            p[0] = c
            p[1] = 1.0 - c
            fc = _value(obj, beta, gamma, p, off)
        else:
            a = c
            c = d
            fc = fd
            d = a + _INVPHI * (b - a)
            p[0] = d
            p[1] = 1.0 - d
            fd = _value(obj, beta, gamma, p, off)
        nfev += 1
    best_t = c if fc <= fd else d
    best_f = min(fc, fd)
    # convex objective: an optimum on a face is approached from inside; check the ends
    for t in (floor, 1.0 - floor):
        p[0] = t
        p[1] = 1.0 - t
        f = _value(obj, beta, gamma, p, off)
        nfev += 1
        if f < best_f:
            best_f = f
            best_t = t
    return best_f, best_t, nfev


@njit(cache=True)
def _inf_over_pi_nm(obj, beta, gamma, off, floor, fatol, xatol, maxfev):
    m = beta.shape[0]
    rows = np.zeros(1, dtype=np.int64)
    best_f = np.inf
    best_z = np.zeros(m - 1)
    total = 0
    # one start leaning to each group, then the uniform point (s == m)
    for s in range(m + 1):
        z0 = np.zeros(m - 1)
        if s < m - 1:
            z0[s] = 3.0
        elif s == m - 1:
            z0[:] = -3.0
        z, f, nfev = _nelder_mead(1, obj, z0, 1.0, fatol, xatol, maxfev,
                                  beta, gamma, np.zeros(m), off, rows, rows,
                                  -_Z_BOUND, _Z_BOUND, floor)
        total += nfev
        if f < best_f:
            best_f = f
            best_z = z
    return best_f, _pi_from_z(best_z, floor), total


# ---------------------------------------------------------------- drivers


class _Game:
    """Shared state for one parameter set and objective."""

    def __init__(self, params: ModelParams, box: SearchBox, obj: int):
        self.params = params
        self.box = box
        self.obj = obj
        self.m = m = params.m
        box.check(m)
        self.beta = np.ascontiguousarray(params.beta, dtype=float)
        self.gamma = np.ascontiguousarray(params.gamma, dtype=float)
        idx = [(i, j) for i in range(m) for j in range(m) if i != j]
        self.rows = np.array([i for i, _ in idx], dtype=np.int64)
        self.cols = np.array([j for _, j in idx], dtype=np.int64)
        self.lo = math.log(box.q_lo)
        self.hi = math.log(box.q_hi)
        self.n_q = len(idx)
        self.inner_tol = box.tol / 10.0
        self.starts = self._starts()
        self.evaluations = 0

    def _starts(self):
        if self.n_q == 0:
            return np.zeros((1, 0))
        sampler = qmc.Halton(d=self.n_q, scramble=True, seed=self.box.seed)
        u = sampler.random(self.box.multistarts)
        return np.ascontiguousarray(self.lo + (self.hi - self.lo) * u)

    def off(self, x):
        return _off_from_x(np.asarray(x, dtype=float), self.rows, self.cols,
                           self.m, self.lo, self.hi)

    def generator(self, x) -> GeneratorMatrix:
        return generator_from_offdiag(self.off(x))

    def pi_of(self, z):
        return _pi_from_z(np.asarray(z, dtype=float), self.box.pi_floor)

    def sup_Q(self, pi):
        pi = np.ascontiguousarray(pi, dtype=float)
        if self.n_q == 0:
            self.evaluations += 1
            v = _value(self.obj, self.beta, self.gamma, pi, np.zeros((1, 1)))
            return v, np.zeros(0)
        maxfev = 400 * self.n_q
        v, x, n = _sup_over_Q(self.obj, self.beta, self.gamma, pi, self.starts,
                              self.rows, self.cols, self.lo, self.hi,
                              self.inner_tol, 1e-4, maxfev)
        self.evaluations += n
        return v, x

    def inf_pi(self, x):
        off = self.off(x)
        if self.m == 1:
            self.evaluations += 1
            return _value(self.obj, self.beta, self.gamma, np.ones(1), off), np.ones(1)
        if self.m == 2:
            v, t, n = _golden_pi(self.obj, self.beta, self.gamma, off,
                                 self.box.pi_floor, self.inner_tol)
            self.evaluations += n
            return v, np.array([t, 1.0 - t])
        v, pi, n = _inf_over_pi_nm(self.obj, self.beta, self.gamma, off,
                                   self.box.pi_floor, self.inner_tol, 1e-6,
                                   600 * self.m)
        self.evaluations += n
        return v, pi


def _golden(f, a, b, tol):
    """Golden-section minimisation of a convex scalar function on [a, b]."""
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    cands = [(fc, c), (fd, d), (f(a), a), (f(b), b)]
    return min(cands)


def _upper(game: _Game) -> GameResult:
    m, box = game.m, game.box
    if m == 1:
        pi = np.ones(1)
        v, x = game.sup_Q(pi)
        return GameResult(float(v), SimplexPoint(pi), game.generator(x), game.evaluations)
    if m == 2:
        fl = box.pi_floor
        _, t = _golden(lambda t: game.sup_Q([t, 1.0 - t])[0], fl, 1.0 - fl, box.tol)
        pi = np.array([t, 1.0 - t])
    else:
        res = minimize(lambda z: game.sup_Q(game.pi_of(z))[0], np.zeros(m - 1),
                       method="Nelder-Mead",
                       options={"fatol": box.tol, "xatol": 1e-6,
                                "maxfev": 800 * m, "adaptive": True})
        pi = game.pi_of(res.x)
    v, x = game.sup_Q(pi)
    return GameResult(float(v), SimplexPoint(pi / pi.sum()), game.generator(x),
                      game.evaluations)


def _lower(game: _Game) -> GameResult:
    box = game.box
    if game.m == 1:
        v, pi = game.inf_pi(np.zeros(0))
        return GameResult(float(v), SimplexPoint(pi), game.generator(np.zeros(0)),
                          game.evaluations)
    bounds = [(game.lo, game.hi)] * game.n_q
    best = None
    for x0 in game.starts:
        res = minimize(lambda x: -game.inf_pi(x)[0], x0, method="Nelder-Mead",
                       bounds=bounds,
                       options={"fatol": box.tol, "xatol": 1e-4,
                                "maxfev": 300 * game.n_q})
        # ordered reduction keeps the result independent of evaluation order
        if best is None or res.fun < best.fun:
            best = res
    x = np.clip(best.x, game.lo, game.hi)
    v, pi = game.inf_pi(x)
    return GameResult(float(v), SimplexPoint(pi / pi.sum()), game.generator(x),
                      game.evaluations)


def _combine(upper: GameResult, lower: GameResult) -> MinimaxResult:
    return MinimaxResult(
        inf_sup=upper.value,
        sup_inf=lower.value,
        gap=upper.value - lower.value,
        pi_arg=upper.pi_arg,
        Q_arg=lower.Q_arg,
        evaluations=upper.evaluations + lower.evaluations,
        upper=upper,
        lower=lower,
    )


def sup_tau_over_Q(params: ModelParams, pi, box: SearchBox = SearchBox()):
    """Largest growth rate the infectives can force against a fixed ``pi``.

    Returns ``(value, Q_arg)``.
    """
    game = _Game(params, box, TAU)
    v, x = game.sup_Q(np.asarray(pi, dtype=float))
    return float(v), game.generator(x)


def sup_r0_over_Q(params: ModelParams, pi, box: SearchBox = SearchBox()):
    """Largest R0 the infectives can force against a fixed ``pi``."""
    game = _Game(params, box, R0)
    v, x = game.sup_Q(np.asarray(pi, dtype=float))
    return float(v), game.generator(x)


def inf_pi_sup_Q_tau(params: ModelParams, box: SearchBox = SearchBox()) -> GameResult:
    """Upper game: the susceptibles commit first."""
    return _upper(_Game(params, box, TAU))


def sup_inf_tau(params: ModelParams, box: SearchBox = SearchBox()) -> GameResult:
    """Lower game: the infectives commit first."""
    return _lower(_Game(params, box, TAU))


def minimax_tau(params: ModelParams, box: SearchBox = SearchBox()) -> MinimaxResult:
    """Both orders of play for the growth rate, with their gap."""
    return _combine(inf_pi_sup_Q_tau(params, box), sup_inf_tau(params, box))


def minimax_r0(params: ModelParams, box: SearchBox = SearchBox()) -> MinimaxResult:
    """Both orders of play for R0. Needs every recovery rate positive."""
    if np.any(params.gamma <= 0):
        raise ValidationError("R0 game needs every recovery rate > 0")
    return _combine(_upper(_Game(params, box, R0)), _lower(_Game(params, box, R0)))

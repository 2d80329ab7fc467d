"""Exact-event simulation of the branching approximation and the finite-N epidemic.

Every replicate draws from its own counter-based stream: the ``k``-th
uniform of replicate ``r`` under seed ``s`` is a fixed function of
``(s, r, k)`` (splitmix64 over a Weyl sequence keyed by ``(s, r)``). Runs
are therefore reproducible regardless of how replicates are scheduled
across threads.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numba
import numpy as np
from numba import njit, prange

from .core import InfectiveState, ModelParams, as_generator, as_simplex, stationary_distribution
from .errors import DimensionMismatch, NotIrreducible, ValidationError

EXTINCT, CAP_REACHED, TIMED_OUT = 0, 1, 2
KIND_NAMES = {EXTINCT: "Extinct", CAP_REACHED: "CapReached", TIMED_OUT: "TimedOut"}
MINOR_OUTBREAK_FRACTION = 0.05

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TWO_M53 = 1.0 / 9007199254740992.0


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    replicates: int = 1
    extinction_cap: int = 10_000
    t_max: float = math.inf
    debug: bool = False

    def __post_init__(self):
        if self.replicates < 1:
            raise ValidationError("replicates must be >= 1")
        if self.extinction_cap < 1:
            raise ValidationError("extinction_cap must be >= 1")
        if not self.t_max > 0:
            raise ValidationError("t_max must be positive")


@dataclass(frozen=True, eq=False)
class SimOutcome:
    kind: str
    total_infections: int
    duration: float
    final_state: InfectiveState


# ---------------------------------------------------------------- RNG


@njit(cache=True)
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def _stream_key(seed, rep):
    return _mix(_mix(np.uint64(seed)) + np.uint64(rep) * _GOLDEN)


@njit(cache=True)
def _uniform(key, counter):
    """Uniform on (0, 1) for draw number ``counter`` of the stream ``key``."""
    x = _mix(key + np.uint64(counter + 1) * _GOLDEN)
    return ((x >> _S11) + np.uint64(1)) * _TWO_M53 * (1.0 - 0.5 * _TWO_M53)


# ---------------------------------------------------------------- kernels


@njit(cache=True)
def _branching_one(off, birth, death, y0, cap, t_max, key, debug):
    """One replicate; returns (kind, total_infections, duration, final_y)."""
    m = y0.shape[0]
    y = y0.copy()
    out = np.zeros(m)
    for j in range(m):
        for i in range(m):
            if i != j:
                out[j] += off[j, i]
    per = out + birth + death
    total = 0.0
    ytot = 0
    for j in range(m):
        total += per[j] * y[j]
        ytot += y[j]
    infections = ytot
    t = 0.0
    ctr = 0
    events = 0
    while True:
        if ytot == 0:
            return EXTINCT, infections, t, y
        if ytot >= cap:
            return CAP_REACHED, infections, t, y
        if total <= 0.0:
            return TIMED_OUT, infections, math.inf, y
        u1 = _uniform(key, ctr)
        u2 = _uniform(key, ctr + 1)
        ctr += 2
        dt = -math.log(u1) / total
        if t + dt > t_max:
            return TIMED_OUT, infections, t_max, y
        t += dt
        target = u2 * total
        # linear scan over groups, then over the event types within the group
        j = -1
        acc = 0.0
        for g in range(m):
            if y[g] > 0:
                j = g
                acc += per[g] * y[g]
                if target < acc:
                    break
        r = min((target - (acc - per[j] * y[j])) / y[j], per[j])
        if r < birth[j]:
            y[j] += 1
            ytot += 1
            infections += 1
            total += per[j]
        elif r < birth[j] + death[j]:
            y[j] -= 1
            ytot -= 1
            total -= per[j]
        else:
            r -= birth[j] + death[j]
            acc = 0.0
            dest = -1
            for i in range(m):
                if i != j:
                    acc += off[j, i]
                    dest = i
                    if r < acc:
                        break
            y[j] -= 1
            y[dest] += 1
            total += per[dest] - per[j]
        events += 1
        if debug and events % 1000 == 0:
            fresh = 0.0
            for g in range(m):
                fresh += per[g] * y[g]
            if abs(fresh - total) > 1e-9 * max(abs(fresh), 1.0):
                raise RuntimeError("incremental total rate drifted from recomputed sum")
            total = fresh


@njit(cache=True, parallel=True)
def _branching_batch(off, birth, death, y0, cap, t_max, seed, first, n, debug):
    m = y0.shape[0]
    kinds = np.empty(n, dtype=np.int64)
    sizes = np.empty(n, dtype=np.int64)
    durations = np.empty(n)
    finals = np.empty((n, m), dtype=np.int64)
    for k in prange(n):
        key = _stream_key(seed, first + k)
        kind, size, dur, y = _branching_one(off, birth, death, y0, cap, t_max, key, debug)
        kinds[k] = kind
        sizes[k] = size
        durations[k] = dur
        finals[k] = y
    return kinds, sizes, durations, finals


@njit(cache=True)
def _multinomial(n, p, key, ctr):
    m = p.shape[0]
    out = np.zeros(m, dtype=np.int64)
    cum = np.cumsum(p)
    for _ in range(n):
        u = _uniform(key, ctr) * cum[m - 1]
        ctr += 1
        g = 0
        while g < m - 1 and u >= cum[g]:
            g += 1
        out[g] += 1
    return out, ctr


@njit(cache=True)
def _finite_one(beta, gamma, Roff, Qoff, N, y0, pi, cap, t_max, key):
    """Full CTMC with susceptibles X, infectives Y and a removed pool.

    Returns (kind, total_infections, duration, final_y, final_x, removed).
    """
    m = y0.shape[0]
    y = y0.copy()
    ytot = 0
    for g in range(m):
        ytot += y[g]
    x, ctr = _multinomial(N - ytot, pi, key, 0)
    removed = 0
    rout = np.zeros(m)
    qout = np.zeros(m)
    for i in range(m):
        for j in range(m):
            if i != j:
                rout[i] += Roff[i, j]
                qout[i] += Qoff[i, j]
    infections = ytot
    t = 0.0
    invN = 1.0 / N
    rates = np.empty(4 * m)
    while True:
        if ytot == 0:
            return EXTINCT, infections, t, y, x, removed
        if ytot >= cap:
            return CAP_REACHED, infections, t, y, x, removed
        total = 0.0
        for g in range(m):
            rates[4 * g] = beta[g] * invN * x[g] * y[g]
            rates[4 * g + 1] = gamma[g] * y[g]
            rates[4 * g + 2] = rout[g] * x[g]
            rates[4 * g + 3] = qout[g] * y[g]
            total += rates[4 * g] + rates[4 * g + 1] + rates[4 * g + 2] + rates[4 * g + 3]
        if total <= 0.0:
            return TIMED_OUT, infections, math.inf, y, x, removed
        u1 = _uniform(key, ctr)
        u2 = _uniform(key, ctr + 1)
        ctr += 2
        dt = -math.log(u1) / total
        if t + dt > t_max:
            return TIMED_OUT, infections, t_max, y, x, removed
        t += dt
        target = u2 * total
        acc = 0.0
        e = -1
        for k in range(4 * m):
            if rates[k] > 0.0:
                e = k
                acc += rates[k]
                if target < acc:
                    break
        g = e // 4
        kind = e % 4
        if kind == 0:
            x[g] -= 1
            y[g] += 1
            ytot += 1
            infections += 1
        elif kind == 1:
            y[g] -= 1
            ytot -= 1
            removed += 1
        else:
            src = Roff if kind == 2 else Qoff
            row = rout[g] if kind == 2 else qout[g]
            r = (target - (acc - rates[e])) / rates[e] * row
            a2 = 0.0
            dest = -1
            for i in range(m):
                if i != g:
                    a2 += src[g, i]
                    dest = i
                    if r < a2:
                        break
            if kind == 2:
                x[g] -= 1
                x[dest] += 1
            else:
                y[g] -= 1
                y[dest] += 1


@njit(cache=True, parallel=True)
def _finite_batch(beta, gamma, Roff, Qoff, N, y0, pi, cap, t_max, seed, first, n):
    m = y0.shape[0]
    kinds = np.empty(n, dtype=np.int64)
    sizes = np.empty(n, dtype=np.int64)
    durations = np.empty(n)
    finals = np.empty((n, m), dtype=np.int64)
    xs = np.empty((n, m), dtype=np.int64)
    removed = np.empty(n, dtype=np.int64)
    for k in prange(n):
        key = _stream_key(seed, first + k)
        kind, size, dur, y, x, rem = _finite_one(beta, gamma, Roff, Qoff, N, y0, pi,
                                                 cap, t_max, key)
        kinds[k] = kind
        sizes[k] = size
        durations[k] = dur
        finals[k] = y
        xs[k] = x
        removed[k] = rem
    return kinds, sizes, durations, finals, xs, removed


# ---------------------------------------------------------------- API


def set_threads(n: int | None = None) -> int:
    """Size the numba worker pool; ``EPIMM_THREADS`` overrides ``n``."""
    env = os.environ.get("EPIMM_THREADS")
    if env:
        n = int(env)
    if n is None:
        n = numba.config.NUMBA_NUM_THREADS
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


def _offdiag(G):
    off = np.array(G.rates, dtype=float)
    np.fill_diagonal(off, 0.0)
    return off


def _branching_inputs(params, pi, Q, y0):
    pi = as_simplex(pi)
    Q = as_generator(Q)
    y0 = y0 if isinstance(y0, InfectiveState) else InfectiveState(y0)
    if not (pi.m == Q.m == params.m == y0.counts.shape[0]):
        raise DimensionMismatch("pi, Q, y0 and params disagree on the number of groups")
    if not Q.irreducible:
        raise NotIrreducible("Q must be irreducible")
    birth = np.ascontiguousarray(params.beta * pi.probs)
    death = np.ascontiguousarray(params.gamma, dtype=float)
    return _offdiag(Q), birth, death, np.array(y0.counts, dtype=np.int64)


def _run_branching(params, pi, Q, y0, cfg, first=0, n=None):
    off, birth, death, y = _branching_inputs(params, pi, Q, y0)
    n = cfg.replicates if n is None else n
    return _branching_batch(off, birth, death, y, cfg.extinction_cap, cfg.t_max,
                            np.uint64(cfg.seed % 2**64), first, n, cfg.debug)


def simulate_branching(params: ModelParams, pi, Q, y0, cfg: SimConfig = SimConfig(),
                       replicate: int = 0) -> SimOutcome:
    """Simulate replicate number ``replicate`` of the branching process."""
    kinds, sizes, durs, finals = _run_branching(params, pi, Q, y0, cfg, replicate, 1)
    return SimOutcome(KIND_NAMES[int(kinds[0])], int(sizes[0]), float(durs[0]),
                      InfectiveState(finals[0]))


def mc_extinction(params: ModelParams, pi, Q, y0, cfg: SimConfig):
    """Fraction of replicates that die out, with its binomial standard error.

    Replicates reaching ``cfg.extinction_cap`` infectives count as survivals.
    """
    kinds, _, _, _ = _run_branching(params, pi, Q, y0, cfg)
    n = kinds.shape[0]
    p = float(np.mean(kinds == EXTINCT))
    return p, math.sqrt(p * (1.0 - p) / n)


def mc_total_size(params: ModelParams, pi, Q, y0, cfg: SimConfig):
    """Mean number ever infected over extinct replicates.

    Returns ``(mean, stderr, capped_fraction)``; a positive capped fraction
    means the mean is biased low and should not be trusted.
    """
    kinds, sizes, _, _ = _run_branching(params, pi, Q, y0, cfg)
    done = sizes[kinds == EXTINCT].astype(float)
    capped = float(np.mean(kinds != EXTINCT))
    if done.size == 0:
        return math.nan, math.nan, capped
    se = float(done.std(ddof=1) / math.sqrt(done.size)) if done.size > 1 else 0.0
    return float(done.mean()), se, capped


def _finite_inputs(params, R, Q, N, y0):
    R = as_generator(R)
    Q = as_generator(Q)
    y0 = y0 if isinstance(y0, InfectiveState) else InfectiveState(y0)
    if not (R.m == Q.m == params.m == y0.counts.shape[0]):
        raise DimensionMismatch("R, Q, y0 and params disagree on the number of groups")
    if not (R.irreducible and Q.irreducible):
        raise NotIrreducible("R and Q must be irreducible")
    if N < y0.total:
        raise ValidationError("population smaller than the initial infectives")
    pi = stationary_distribution(R).probs
    return (np.ascontiguousarray(params.beta), np.ascontiguousarray(params.gamma),
            _offdiag(R), _offdiag(Q), int(N), np.array(y0.counts, dtype=np.int64), pi)


def _run_finite(params, R, Q, N, y0, cfg, first=0, n=None):
    beta, gamma, Roff, Qoff, N, y, pi = _finite_inputs(params, R, Q, N, y0)
    n = cfg.replicates if n is None else n
    return _finite_batch(beta, gamma, Roff, Qoff, N, y, pi, cfg.extinction_cap,
                         cfg.t_max, np.uint64(cfg.seed % 2**64), first, n)


@dataclass(frozen=True, eq=False)
class FiniteOutcome(SimOutcome):
    susceptibles: np.ndarray = None
    removed: int = 0


def simulate_finite_N(params: ModelParams, R, Q, N: int, y0, cfg: SimConfig = SimConfig(),
                      replicate: int = 0) -> FiniteOutcome:
    """One replicate of the closed-population epidemic with migration.

    Initial susceptibles are multinomial over the stationary law of ``R``.
    Infection in group ``i`` happens at rate ``beta_i X_i Y_i / N``.
    """
    kinds, sizes, durs, finals, xs, rem = _run_finite(params, R, Q, N, y0, cfg, replicate, 1)
    return FiniteOutcome(KIND_NAMES[int(kinds[0])], int(sizes[0]), float(durs[0]),
                         InfectiveState(finals[0]), xs[0].copy(), int(rem[0]))


def mc_minor_outbreak(params: ModelParams, R, Q, N: int, y0, cfg: SimConfig,
                      threshold: float = MINOR_OUTBREAK_FRACTION):
    """Fraction of finite-N runs with fewer than ``threshold * N`` infections.

    Returns ``(fraction, stderr, threshold_count)``.
    """
    kinds, sizes, _, _, _, _ = _run_finite(params, R, Q, N, y0, cfg)
    limit = threshold * N
    minor = (sizes < limit) & (kinds == EXTINCT)
    p = float(np.mean(minor))
    return p, math.sqrt(p * (1.0 - p) / kinds.shape[0]), limit

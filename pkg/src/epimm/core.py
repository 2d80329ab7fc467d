"""Domain types for the metapopulation model and generator-matrix utilities.

Rates are per unit time throughout. Arrays stored on the frozen types are
made read-only so values can be shared freely between callers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    LengthMismatch,
    MalformedGenerator,
    NegativeGamma,
    NonPositiveBeta,
    NotIrreducible,
    ValidationError,
)

SIMPLEX_TOL = 1e-12
GENERATOR_TOL = 1e-12


def _frozen(a, ndim):
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        raise DimensionMismatch(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Per-group contact rates ``beta`` and recovery rates ``gamma``."""

    beta: np.ndarray
    gamma: np.ndarray

    @property
    def m(self) -> int:
        return self.beta.shape[0]

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        return np.array_equal(self.beta, other.beta) and np.array_equal(
            self.gamma, other.gamma
        )

    def __hash__(self):
        return hash((self.beta.tobytes(), self.gamma.tobytes()))


@dataclass(frozen=True, eq=False)
class SimplexPoint:
    """A probability vector over the groups."""

    probs: np.ndarray

    def __post_init__(self):
        p = _frozen(self.probs, 1)
        if p.size == 0:
            raise ValidationError("empty probability vector")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValidationError(f"probabilities must be finite and >= 0: {p}")
        if abs(p.sum() - 1.0) > SIMPLEX_TOL:
            raise ValidationError(f"probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "probs", p)

    @property
    def m(self) -> int:
        return self.probs.shape[0]

    @property
    def interior(self) -> bool:
        return bool(np.all(self.probs >= SIMPLEX_TOL))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.probs, dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, SimplexPoint):
            return NotImplemented
        return np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    """A conservative rate matrix: nonnegative off-diagonals, zero row sums."""

    rates: np.ndarray

    def __post_init__(self):
        G = _frozen(self.rates, 2)
        _check_generator_shape(G)
        object.__setattr__(self, "rates", G)

    @property
    def m(self) -> int:
        return self.rates.shape[0]

    @property
    def irreducible(self) -> bool:
        return _strongly_connected(self.rates)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.rates, dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, GeneratorMatrix):
            return NotImplemented
        return np.array_equal(self.rates, other.rates)

    def __hash__(self):
        return hash(self.rates.tobytes())


@dataclass(frozen=True, eq=False)
class InfectiveState:
    """Infective counts per group."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64)
        if c.ndim != 1:
            raise DimensionMismatch("infective counts must be a vector")
        if np.any(c < 0):
            raise ValidationError(f"negative infective count: {c}")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other):
        if not isinstance(other, InfectiveState):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)

    def __hash__(self):
        return hash(self.counts.tobytes())


def validate_params(beta, gamma=None) -> ModelParams:
    """Validate contact and recovery rates.

    Accepts either two array-likes or an existing :class:`ModelParams`
    (returned unchanged after re-checking).
    """
    if isinstance(beta, ModelParams):
        if gamma is not None:
            raise TypeError("pass either ModelParams or beta and gamma, not both")
        beta, gamma = beta.beta, beta.gamma
    b = np.array(beta, dtype=float).reshape(-1)
    g = np.array(gamma, dtype=float).reshape(-1)
    if b.size != g.size:
        raise LengthMismatch(f"beta has {b.size} entries, gamma has {g.size}")
    if b.size < 1:
        raise LengthMismatch("need at least one group")
    if not (np.all(np.isfinite(b)) and np.all(np.isfinite(g))):
        raise ValidationError("rates must be finite")
    if np.any(b <= 0):
        raise NonPositiveBeta(f"contact rates must be > 0: {b}")
    if np.any(g < 0):
        raise NegativeGamma(f"recovery rates must be >= 0: {g}")
    b.setflags(write=False)
    g.setflags(write=False)
    return ModelParams(b, g)


def as_simplex(pi) -> SimplexPoint:
    return pi if isinstance(pi, SimplexPoint) else SimplexPoint(pi)


def as_generator(G) -> GeneratorMatrix:
    return G if isinstance(G, GeneratorMatrix) else GeneratorMatrix(G)


def _check_generator_shape(G: np.ndarray) -> None:
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise MalformedGenerator(f"generator must be square, got shape {G.shape}")
    if not np.all(np.isfinite(G)):
        raise MalformedGenerator("generator has non-finite entries")
    off = G[~np.eye(G.shape[0], dtype=bool)]
    if np.any(off < 0):
        raise MalformedGenerator("negative off-diagonal rate")
    rows = G.sum(axis=1)
    if np.any(np.abs(rows) > GENERATOR_TOL):
        raise MalformedGenerator(f"row sums are not zero: {rows}")


def _strongly_connected(G: np.ndarray) -> bool:
    m = G.shape[0]
    if m == 1:
        return True
    adj = G > 0
    np.fill_diagonal(adj, False)

    def reaches_all(a):
        seen = np.zeros(m, dtype=bool)
        seen[0] = True
        stack = [0]
        while stack:
            i = stack.pop()
            for j in np.flatnonzero(a[i] & ~seen):
                seen[j] = True
                stack.append(j)
        return bool(seen.all())

    return reaches_all(adj) and reaches_all(adj.T)


def check_irreducible(G) -> bool:
    """True iff the digraph of strictly positive off-diagonal rates is strongly connected."""
    G = G.rates if isinstance(G, GeneratorMatrix) else np.asarray(G, dtype=float)
    _check_generator_shape(G)
    return _strongly_connected(G)


def generator_from_offdiag(off) -> GeneratorMatrix:
    """Build a generator from a matrix of off-diagonal rates (diagonal ignored)."""
    off = np.array(off, dtype=float)
    np.fill_diagonal(off, 0.0)
    np.fill_diagonal(off, -off.sum(axis=1))
    return GeneratorMatrix(off)


def stationary_distribution(G) -> SimplexPoint:
    """Stationary law of an irreducible generator.

    Solves ``pi G = 0`` with the last balance equation replaced by the
    normalisation ``sum(pi) = 1``.
    """
    G = as_generator(G)
    if not G.irreducible:
        raise NotIrreducible("stationary distribution needs an irreducible generator")
    m = G.m
    if m == 1:
        return SimplexPoint(np.ones(1))
    M = G.rates.T.copy()
    M[-1, :] = 1.0
    rhs = np.zeros(m)
    rhs[-1] = 1.0
    pi = np.linalg.solve(M, rhs)
    # clip rounding-level negatives, then renormalise
    pi = np.maximum(pi, 0.0)
    pi /= pi.sum()
    return SimplexPoint(pi)

"""Latent positions on the d-torus and graph generation.

Coordinates live canonically in [-1/2, 1/2).  The per-coordinate metric is
the wrap-around circle distance |x - y|_C = min(|x - y|, 1 - |x - y|); a
pair's distance is the sum of q-th powers of the coordinate distances
(finite q, no q-th root taken) or the coordinate maximum (q = infinity).
Graphs connect pairs whose distance is <= tau (inclusive).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .rng import stream

INFINITY = math.inf

# Stream labels are (config stream, purpose offset); purposes keep the
# position stream of trial t distinct from e.g. its G(n,p) coin stream.
STREAM_POSITIONS = 0x01
STREAM_GNP = 0x02


@dataclass(frozen=True)
class ModelConfig:
    """One experiment: RGG_q(n, d, p) with a master seed.

    norm is a positive integer q or INFINITY (math.inf).
    """

    n: int
    d: int
    p: float
    norm: float
    master_seed: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need n >= 2, got {self.n}")
        if self.d < 1:
            raise ValueError(f"need d >= 1, got {self.d}")
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"need 0 < p < 1, got {self.p}")
        if self.norm != INFINITY:
            if self.norm < 1 or int(self.norm) != self.norm:
                raise ValueError(f"finite norm must be an integer >= 1, got {self.norm}")

    @property
    def q(self) -> float:
        return self.norm


def wrap(x: np.ndarray | float) -> np.ndarray | float:
    """Reduce coordinates mod 1 into [-1/2, 1/2)."""
    return ((np.asarray(x) + 0.5) % 1.0) - 0.5


def circle_distance(a, b):
    """Wrap-around distance on the unit circle, in [0, 1/2]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("non-finite circle coordinate")
    diff = np.abs(wrap(a) - wrap(b))
    return np.minimum(diff, 1.0 - diff)


def pair_distance(u: np.ndarray, v: np.ndarray, norm: float) -> float:
    """Distance between two position rows.

    Finite q: sum_i |u_i - v_i|_C^q  (the q-th power, not the root).
    Infinity: max_i |u_i - v_i|_C.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.shape} vs {v.shape}")
    c = circle_distance(u, v)
    if norm == INFINITY:
        return float(np.max(c))
    return float(np.sum(c ** norm))


def sample_positions(config: ModelConfig, stream_id: int,
                     dtype=np.float64) -> np.ndarray:
    """n x d i.i.d. Uniform[-1/2, 1/2) latent positions."""
    gen = stream(config.master_seed, (stream_id << 8) | STREAM_POSITIONS)
    if dtype == np.float32:
        return gen.random((config.n, config.d), dtype=np.float32) - np.float32(0.5)
    return gen.random((config.n, config.d)) - 0.5


@njit(parallel=True, fastmath=True, cache=True)
def _delta_matrix_q1(X):
    n, d = X.shape
    out = np.zeros((n, n))
    for u in prange(n):
        for v in range(u + 1, n):
            s = 0.0
            for i in range(d):
                df = abs(X[u, i] - X[v, i])
                if df > 0.5:
                    df = 1.0 - df
                s += df
            out[u, v] = s
            out[v, u] = s
    return out


@njit(parallel=True, fastmath=True, cache=True)
def _delta_matrix_q2(X):
    n, d = X.shape
    out = np.zeros((n, n))
    for u in prange(n):
        for v in range(u + 1, n):
            s = 0.0
            for i in range(d):
                df = abs(X[u, i] - X[v, i])
                if df > 0.5:
                    df = 1.0 - df
                s += df * df
            out[u, v] = s
            out[v, u] = s
    return out


@njit(parallel=True, fastmath=True, cache=True)
def _delta_matrix_qgen(X, q):
    n, d = X.shape
    out = np.zeros((n, n))
    for u in prange(n):
        for v in range(u + 1, n):
            s = 0.0
            for i in range(d):
                df = abs(X[u, i] - X[v, i])
                if df > 0.5:
                    df = 1.0 - df
                s += df ** q
            out[u, v] = s
            out[v, u] = s
    return out


@njit(parallel=True, fastmath=True, cache=True)
def _delta_matrix_inf(X):
    n, d = X.shape
    out = np.zeros((n, n))
    for u in prange(n):
        for v in range(u + 1, n):
            s = 0.0
            for i in range(d):
                df = abs(X[u, i] - X[v, i])
                if df > 0.5:
                    df = 1.0 - df
                if df > s:
                    s = df
            out[u, v] = s
            out[v, u] = s
    return out


def delta_matrix(positions: np.ndarray, norm: float) -> np.ndarray:
    """All-pairs distance matrix (zero diagonal).

    Each entry is accumulated sequentially over dimensions by one thread,
    so the result is bitwise independent of the thread count.  float32
    positions are processed as-is (the kernels accumulate in float64);
    anything else is promoted to float64.
    """
    dtype = np.float32 if positions.dtype == np.float32 else np.float64
    X = np.ascontiguousarray(positions, dtype=dtype)
    if norm == INFINITY:
        return _delta_matrix_inf(X)
    if norm == 1:
        return _delta_matrix_q1(X)
    if norm == 2:
        return _delta_matrix_q2(X)
    return _delta_matrix_qgen(X, float(norm))


def build_rgg(positions: np.ndarray, tau: float, norm: float) -> np.ndarray:
    """Adjacency matrix: edge iff pair_distance <= tau (inclusive)."""
    if tau < 0:
        raise ValueError(f"need tau >= 0, got {tau}")
    D = delta_matrix(positions, norm)
    A = D <= tau
    np.fill_diagonal(A, False)
    return A


def sample_rgg(config: ModelConfig, tau: float, stream_id: int,
               dtype=np.float32) -> np.ndarray:
    """Fresh positions for `stream_id`, then the graph.

    Positions default to float32 here: the all-pairs kernels are
    memory-bound and the 2^-24 coordinate quantization perturbs each pair
    distance by orders of magnitude less than its sampling noise.
    """
    return build_rgg(sample_positions(config, stream_id, dtype=dtype),
                     tau, config.norm)


def sample_gnp(config: ModelConfig, stream_id: int) -> np.ndarray:
    """Erdos-Renyi sample: each unordered pair present w.p. p."""
    gen = stream(config.master_seed, (stream_id << 8) | STREAM_GNP)
    n = config.n
    U = gen.random((n, n))
    A = np.zeros((n, n), dtype=bool)
    iu = np.triu_indices(n, 1)
    A[iu] = U[iu] < config.p
    A |= A.T
    return A


def check_adjacency(A: np.ndarray) -> None:
    """Assert the symmetric / zero-diagonal invariants."""
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("adjacency must be square")
    if np.any(np.diagonal(A)):
        raise ValueError("adjacency has a nonzero diagonal")
    if not np.array_equal(A, A.T):
        raise ValueError("adjacency is not symmetric")


def edges_to_text(A: np.ndarray) -> str:
    """Edge-list serialization: one '{u} {v}' per line, 0-indexed, u < v."""
    u, v = np.nonzero(np.triu(A, 1))
    return "".join(f"{a} {b}\n" for a, b in zip(u.tolist(), v.tolist()))


def edges_from_text(text: str, n: int) -> np.ndarray:
    A = np.zeros((n, n), dtype=bool)
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        a, b = map(int, line.split())
        A[a, b] = A[b, a] = True
    return A

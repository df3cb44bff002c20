"""Closed-walk combinatorics: multigraphs, core contraction, trace powers.

A closed walk maps to an Eulerian multigraph (self-steps dropped).  The
core is what remains after repeatedly removing cycles whose interior
vertices have degree 2 (keeping one anchor per cycle; a degree-2 vertex
with a doubled edge to a single neighbor is a degenerate length-2 cycle)
and then contracting maximal degree-2 chains into single edges.  The core
is a single isolated vertex or has >= 2 vertices and minimum degree 4, and
the accounting

    |V(H)| = |E(H)| - s - |E(core)| + |V(core)|

is exact with s the number of removed cycles.  Note the degenerate rule
applies only at degree exactly 2: a vertex joined to a single neighbor by
4 or more parallel edges stays in the core (it already has core degree),
which is precisely what keeps the identity above and idempotence of the
contraction exact.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .calibration import calibrate
from .torus import ModelConfig, sample_rgg


def _edge(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass
class Multigraph:
    vertices: set
    edges: Counter  # (u, v) with u < v -> multiplicity

    def copy(self) -> "Multigraph":
        return Multigraph(set(self.vertices), Counter(self.edges))

    @property
    def n_edges(self) -> int:
        return sum(self.edges.values())

    def degree(self, v) -> int:
        return sum(m for e, m in self.edges.items() if v in e)

    def degrees(self) -> dict:
        deg = {v: 0 for v in self.vertices}
        for (u, v), m in self.edges.items():
            deg[u] += m
            deg[v] += m
        return deg

    def neighbors(self, v) -> set:
        out = set()
        for (a, b), m in self.edges.items():
            if m <= 0:
                continue
            if a == v:
                out.add(b)
            elif b == v:
                out.add(a)
        return out

    def is_connected(self) -> bool:
        if not self.vertices:
            return True
        seen = set()
        stack = [min(self.vertices)]
        adj = {v: set() for v in self.vertices}
        for (u, v), m in self.edges.items():
            if m > 0:
                adj[u].add(v)
                adj[v].add(u)
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            stack.extend(adj[v] - seen)
        return seen == self.vertices

    def is_eulerian(self) -> bool:
        return self.is_connected() and all(d % 2 == 0 for d in self.degrees().values())

    def remove_edge(self, u, v, mult: int = 1) -> None:
        e = _edge(u, v)
        if self.edges[e] < mult:
            raise ValueError(f"removing {mult} copies of missing edge {e}")
        self.edges[e] -= mult
        if self.edges[e] == 0:
            del self.edges[e]

    def __eq__(self, other) -> bool:
        return (isinstance(other, Multigraph)
                and self.vertices == other.vertices
                and {e: m for e, m in self.edges.items() if m}
                == {e: m for e, m in other.edges.items() if m})


def walk_to_multigraph(walk) -> Multigraph:
    """Multigraph of a closed walk: edge per step, self-steps dropped."""
    walk = list(walk)
    if len(walk) < 2 or walk[0] != walk[-1]:
        raise ValueError("walk must be closed (first vertex = last vertex)")
    edges = Counter()
    for a, b in zip(walk, walk[1:]):
        if a != b:
            edges[_edge(a, b)] += 1
    return Multigraph(vertices=set(walk), edges=edges)


@dataclass(frozen=True)
class RemovedCycle:
    vertices: tuple      # anchor first, then interior in cycle order
    edge_count: int
    degenerate: bool

    @property
    def anchor(self):
        return self.vertices[0]


@dataclass
class CoreReport:
    core: Multigraph
    removed_cycles: list = field(default_factory=list)
    contracted_chains: list = field(default_factory=list)   # edge counts
    non_contracted_edges: Counter = field(default_factory=Counter)  # E_U
    contracted_edge_multiset: Counter = field(default_factory=Counter)  # E_C
    source_vertices: int = 0
    source_edges: int = 0

    @property
    def s(self) -> int:
        return len(self.removed_cycles)

    @property
    def s_d(self) -> int:
        return sum(1 for c in self.removed_cycles if c.degenerate)

    @property
    def trivial(self) -> bool:
        return len(self.core.vertices) == 1 and self.core.n_edges == 0

    def counting_identity_holds(self) -> bool:
        return (self.source_vertices
                == self.source_edges - self.s - self.core.n_edges
                + len(self.core.vertices))


def _degree2_paths(H: Multigraph, deg: dict):
    """Maximal paths of degree-2 vertices that have two distinct neighbors.

    Yields (interior_path, attach_left, attach_right); a path closing on
    itself (an all-degree-2 component) is yielded as (cycle_path, None, None).
    """
    eligible = {v for v in H.vertices if deg[v] == 2 and len(H.neighbors(v)) == 2}
    seen = set()
    for start in sorted(eligible):
        if start in seen:
            continue
        path = [start]
        seen.add(start)
        nbs = sorted(H.neighbors(start))
        closed = False
        ends = []
        for direction in nbs:
            prev, cur = start, direction
            while cur in eligible and cur not in path:
                path.append(cur) if direction == nbs[1] else path.insert(0, cur)
                seen.add(cur)
                nxt = [w for w in H.neighbors(cur) if w != prev]
                # degree-2 with two distinct neighbors: exactly one way forward
                prev, cur = cur, nxt[0]
            if cur in path and cur != start:
                # re-entered the path: only possible for a pure cycle component
                closed = True
                break
            if cur == start:
                closed = True
                break
            ends.append(cur)
        if closed:
            yield path, None, None
        else:
            yield path, ends[0], ends[1]


def _find_cycles(H: Multigraph):
    """All removable cycles in the current graph, as candidate records."""
    deg = H.degrees()
    out = []
    # degenerate: degree exactly 2, single distinct neighbor (a doubled edge)
    pairs = set()
    for v in sorted(H.vertices):
        if deg[v] != 2:
            continue
        nbs = H.neighbors(v)
        if len(nbs) == 1:
            u = next(iter(nbs))
            pairs.add(_edge(u, v))
    for (a, b) in sorted(pairs):
        if deg[a] == 2 and deg[b] == 2:
            anchor, interior = a, b       # isolated doubled pair: keep min label
        elif deg[b] == 2 and len(H.neighbors(b)) == 1:
            anchor, interior = a, b
        else:
            anchor, interior = b, a
        out.append(RemovedCycle(vertices=(anchor, interior), edge_count=2,
                                degenerate=True))
    # non-degenerate: interior = maximal degree-2 path, attachments coincide
    for path, a, b in _degree2_paths(H, deg):
        if a is None:
            anchor = min(path)
            i = path.index(anchor)
            order = path[i:] + path[:i]
            out.append(RemovedCycle(vertices=tuple(order),
                                    edge_count=len(path), degenerate=False))
        elif a == b:
            out.append(RemovedCycle(vertices=(a, *path),
                                    edge_count=len(path) + 1, degenerate=False))
    return out


def _remove_cycle(H: Multigraph, cyc: RemovedCycle) -> None:
    vs = list(cyc.vertices)
    if cyc.degenerate:
        H.remove_edge(vs[0], vs[1], 2)
        H.vertices.discard(vs[1])
        return
    ring = vs + [vs[0]]
    for a, b in zip(ring, ring[1:]):
        H.remove_edge(a, b)
    for v in vs[1:]:
        H.vertices.discard(v)
    # an anchor whose component was exactly this cycle stays as the core seed
    if not H.edges and len(H.vertices) > 1:
        raise AssertionError("cycle removal disconnected the graph")


def contract_core(H: Multigraph) -> CoreReport:
    """Cycle removal to exhaustion, then chain contraction (one pass).

    Deterministic: among simultaneous candidates the cycle with the
    lexicographically smallest sorted vertex tuple goes first, and the
    anchor of an all-degree-2 cycle is its smallest label.
    """
    if not H.is_eulerian():
        raise ValueError("input multigraph is not connected Eulerian")
    report = CoreReport(core=H.copy(), source_vertices=len(H.vertices),
                        source_edges=H.n_edges)
    G = report.core

    while True:
        candidates = _find_cycles(G)
        if not candidates:
            break
        chosen = min(candidates, key=lambda c: (tuple(sorted(c.vertices)), c.vertices))
        _remove_cycle(G, chosen)
        report.removed_cycles.append(chosen)

    deg = G.degrees()
    chains = []
    for path, a, b in _degree2_paths(G, deg):
        if a is None or a == b:
            raise AssertionError("unremoved cycle surviving phase 1")
        chains.append((path, a, b))
    for path, a, b in sorted(chains, key=lambda t: tuple(sorted(t[0]))):
        seq = [a] + path + [b]
        for u, v in zip(seq, seq[1:]):
            G.remove_edge(u, v)
        for w in path:
            G.vertices.discard(w)
        G.edges[_edge(a, b)] += 1
        report.contracted_edge_multiset[_edge(a, b)] += 1
        report.contracted_chains.append(len(path) + 1)

    report.non_contracted_edges = Counter(
        {e: m for e, m in (G.edges - report.contracted_edge_multiset).items() if m > 0})

    if not (report.trivial or (len(G.vertices) >= 2
                               and min(G.degrees().values()) >= 4)):
        raise AssertionError("core is neither trivial nor of minimum degree 4")
    return report


# ---------------------------------------------------------------------------
# trace powers of the centered adjacency matrix
# ---------------------------------------------------------------------------

def trace_power(centered_matrix: np.ndarray, m: int) -> float:
    """tr(M^m) for even m via repeated symmetric multiplication."""
    if m < 2 or m % 2 != 0:
        raise ValueError(f"need even m >= 2, got {m}")
    M = np.asarray(centered_matrix, dtype=np.float64)
    if M.shape[0] > 4000:
        raise ValueError("dense trace power capped at n = 4000")
    half = np.linalg.matrix_power(M, m // 2)
    # tr(P P) = sum of squared entries for symmetric P
    return float(np.einsum("ij,ij->", half, half))


def brute_walk_sum(adjacency: np.ndarray, p: float, m: int) -> float:
    """Exact sum over all closed walks of length m of prod (A - p) steps.

    Self-steps contribute a factor of -p.  Enumeration oracle for
    trace_power; budget n^m <= 1e7.
    """
    n = adjacency.shape[0]
    if n**m > 10**7:
        raise ValueError(f"walk enumeration budget exceeded: {n}^{m} > 1e7")
    M = adjacency.astype(np.float64) - p  # diagonal becomes -p
    total = 0.0
    walk = [0] * m

    def recurse(j: int, prod: float):
        nonlocal total
        if j == m - 1:
            # close the walk: last step returns to walk[0]
            total += prod * M[walk[m - 1], walk[0]]
            return
        for v in range(n):
            walk[j + 1] = v
            recurse(j + 1, prod * M[walk[j], v])

    for v0 in range(n):
        walk[0] = v0
        recurse(0, 1.0)
    return total


def empirical_trace_moment(config: ModelConfig, m: int, trials: int,
                           tau: float | None = None, stream_id: int = 0):
    """MC mean of tr((A - p)^m) over fresh geometric samples.

    Returns (mean, stderr, regime_prediction) with the two-regime constant-1
    prediction d (np/sqrt d)^m + n (np)^{m/2}.
    """
    if m % 2 != 0:
        raise ValueError(f"need even m, got {m}")
    if config.n > 2000:
        raise ValueError("empirical trace moment capped at n = 2000")
    if tau is None:
        tau = calibrate(config.norm, config.d, config.p,
                        master_seed=config.master_seed, stream_id=stream_id).tau
    vals = np.empty(trials)
    for t in range(trials):
        A = sample_rgg(config, tau, (stream_id << 20) | t)
        vals[t] = trace_power(A.astype(np.float64) - config.p, m)
    n, d, p = config.n, config.d, config.p
    prediction = d * (n * p / math.sqrt(d)) ** m + n * (n * p) ** (m / 2.0)
    stderr = float(vals.std(ddof=1) / math.sqrt(trials)) if trials > 1 else float("inf")
    return float(vals.mean()), stderr, prediction

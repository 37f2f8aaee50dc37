"""Oriented weighted networks and their tree/cycle decomposition.

Vertices are 0-based internally; the JSON file format is 1-based and the
conversion happens in :mod:`consensus_lab.io`.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DisconnectedGraph, EmptyCycleSpace, InvalidNetwork


@dataclass(frozen=True)
class OrientedNetwork:
    """A graph with oriented edges and one real conductance per edge.

    For a directed network the edge ``(i, j)`` means agent ``i`` listens to
    agent ``j`` with weight ``a_ij``.  For an undirected network the
    orientation is only a bookkeeping choice and the conductance matrix is
    symmetric.  Negative conductances are allowed.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    conductance: np.ndarray = field(default=None, repr=False)
    directed: bool = False

    def __post_init__(self):
        arr = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        arr.setflags(write=False)
        object.__setattr__(self, "_edge_array", arr)
        object.__setattr__(self, "edges", tuple(zip(arr[:, 0].tolist(), arr[:, 1].tolist())))
        if self.conductance is None:
            c = np.ones(len(self.edges))
        else:
            c = np.array(self.conductance, dtype=float).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "conductance", c)
        self._validate()

    def _validate(self):
        if self.n < 1:
            raise InvalidNetwork(f"need at least one vertex, got n={self.n}")
        if len(self.conductance) != len(self.edges):
            raise InvalidNetwork("one conductance per edge is required")
        if not np.all(np.isfinite(self.conductance)):
            raise InvalidNetwork("conductances must be finite")
        E = self._edge_array
        if E.size == 0:
            return
        bad = np.flatnonzero((E < 0).any(axis=1) | (E >= self.n).any(axis=1))
        if bad.size:
            t, h = E[bad[0]]
            raise InvalidNetwork(f"edge ({t}, {h}) has a vertex outside [0, {self.n})")
        loops = np.flatnonzero(E[:, 0] == E[:, 1])
        if loops.size:
            raise InvalidNetwork(f"self-loop at vertex {E[loops[0], 0]}")
        keys = E if self.directed else np.sort(E, axis=1)
        uniq, counts = np.unique(keys[:, 0] * self.n + keys[:, 1], return_counts=True)
        if np.any(counts > 1):
            k = int(uniq[np.argmax(counts > 1)])
            raise InvalidNetwork(f"duplicate edge {(k // self.n, k % self.n)}; multigraphs are not supported")

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def is_simple(self) -> bool:
        return not self.directed and bool(np.all(self.conductance == 1.0))

    def conductance_matrix(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        t, h = self._edge_array.T
        np.add.at(A, (t, h), self.conductance)
        if not self.directed:
            np.add.at(A, (h, t), self.conductance)
        return A

    def coupling_matrix(self) -> np.ndarray:
        """``D = A - diag(A e)``, so that ``D e = 0``."""
        A = self.conductance_matrix()
        return A - np.diag(A.sum(axis=1))

    def laplacian(self) -> np.ndarray:
        return -self.coupling_matrix()

    def neighbors(self) -> list[list[int]]:
        """Adjacency lists of the underlying undirected graph, ascending."""
        adj: list[set[int]] = [set() for _ in range(self.n)]
        for t, h in self.edges:
            adj[t].add(h)
            adj[h].add(t)
        return [sorted(a) for a in adj]

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.neighbors()])

    def is_connected(self) -> bool:
        return bool(np.all(bfs_distances(self.neighbors(), 0) >= 0))

    def reoriented(self, flip) -> "OrientedNetwork":
        """Copy with the edges selected by the boolean mask ``flip`` reversed."""
        flip = np.asarray(flip, dtype=bool)
        edges = tuple((h, t) if f else (t, h) for (t, h), f in zip(self.edges, flip))
        return OrientedNetwork(self.n, edges, self.conductance.copy(), self.directed)


def bfs_distances(adj: list[list[int]], source: int) -> np.ndarray:
    dist = np.full(len(adj), -1, dtype=int)
    dist[source] = 0
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def diameter(net: OrientedNetwork) -> float:
    """Largest BFS distance over all vertex pairs; ``inf`` when disconnected."""
    adj = net.neighbors()
    best = 0
    for v in range(net.n):
        dist = bfs_distances(adj, v)
        if np.any(dist < 0):
            return float("inf")
        best = max(best, int(dist.max()))
    return float(best)


def coboundary(net: OrientedNetwork) -> np.ndarray:
    """Signed edge-vertex incidence matrix ``H`` (m x n, integer).

    Row ``i`` has ``+1`` at the head (positive end) of edge ``i`` and ``-1``
    at its tail, so ``H.T @ H`` is the unweighted Laplacian.
    """
    H = np.zeros((net.m, net.n), dtype=np.int64)
    for i, (t, h) in enumerate(net.edges):
        H[i, h] = 1
        H[i, t] = -1
    return H


@dataclass(frozen=True)
class TreeCycleDecomposition:
    """Spanning tree, chords and fundamental cycles of a connected network.

    Edges are renumbered tree-first: positions ``0 .. n-2`` hold the
    spanning tree, positions ``n-1 .. m-1`` hold the chords.  ``order[k]`` is
    the index in the original network of the edge now at position ``k``.
    Row ``k`` of ``Z = (Q  I_c)`` is the signed edge vector of the
    fundamental cycle closed by chord ``k``, oriented along the chord.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    order: np.ndarray
    H: np.ndarray
    H_tilde: np.ndarray
    Q: np.ndarray
    C1: np.ndarray
    C2: np.ndarray

    @property
    def c(self) -> int:
        return self.Q.shape[0]

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def tree_edges(self) -> np.ndarray:
        return self.order[: self.n - 1]

    @property
    def Z(self) -> np.ndarray:
        return np.hstack([self.Q, np.eye(self.c, dtype=np.int64)])

    @property
    def fundamental_cycles(self) -> list[np.ndarray]:
        """Edge positions (tree-first numbering) of each fundamental cycle."""
        Z = self.Z
        return [np.flatnonzero(row) for row in Z]

    def coupling_matrix(self) -> np.ndarray:
        """``-H~^T (C1 + Q^T C2 Q) H~``, the undirected coupling matrix."""
        Ht = self.H_tilde.astype(float)
        return -Ht.T @ self.tree_gram() @ Ht

    def tree_gram(self) -> np.ndarray:
        """``C1 + Q^T C2 Q``; positive definite iff the protocol converges."""
        Q = self.Q.astype(float)
        return np.diag(self.C1) + Q.T @ np.diag(self.C2) @ Q


def spanning_tree_decomposition(net: OrientedNetwork) -> TreeCycleDecomposition:
    """Split a connected network into a BFS spanning tree and its chords.

    The tree is grown by breadth-first search from vertex 0 with neighbours
    scanned in ascending order, so the result is deterministic.  Edge
    orientations are taken from ``net``.
    """
    n = net.n
    edge_index: dict[tuple[int, int], int] = {}
    for i, (t, h) in enumerate(net.edges):
        edge_index.setdefault((min(t, h), max(t, h)), i)

    adj = net.neighbors()
    parent = np.full(n, -1, dtype=int)
    parent_edge = np.full(n, -1, dtype=int)
    depth = np.full(n, -1, dtype=int)
    depth[0] = 0
    tree: list[int] = []
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if depth[w] < 0:
                depth[w] = depth[v] + 1
                parent[w] = v
                parent_edge[w] = edge_index[(min(v, w), max(v, w))]
                tree.append(int(parent_edge[w]))
                queue.append(w)
    if len(tree) != n - 1:
        raise DisconnectedGraph(f"spanning tree reaches {len(tree) + 1} of {n} vertices")

    in_tree = set(tree)
    chords = [i for i in range(net.m) if i not in in_tree]
    order = np.array(tree + chords, dtype=int)
    position = np.empty(net.m, dtype=int)
    position[order] = np.arange(net.m)

    H_full = coboundary(net)
    H = H_full[order]
    c = len(chords)
    Q = np.zeros((c, n - 1), dtype=np.int64)
    for k, e in enumerate(chords):
        u, v = net.edges[e]
        # the cycle runs tail -> head along the chord, then back v -> u in the tree
        for x, y in _tree_path(v, u, parent, depth):
            w = x if parent[x] == y else y
            t_e, _ = net.edges[parent_edge[w]]
            Q[k, position[parent_edge[w]]] = 1 if t_e == x else -1

    cond = net.conductance[order]
    return TreeCycleDecomposition(
        n=n,
        edges=tuple(net.edges[i] for i in order),
        order=order,
        H=H,
        H_tilde=H[: n - 1],
        Q=Q,
        C1=cond[: n - 1].copy(),
        C2=cond[n - 1:].copy(),
    )


def _tree_path(a: int, b: int, parent: np.ndarray, depth: np.ndarray) -> list[tuple[int, int]]:
    """Directed steps ``(x, y)`` walking the tree from ``a`` to ``b``."""
    up, down = [], []
    while a != b:
        if depth[a] >= depth[b]:
            up.append((a, int(parent[a])))
            a = int(parent[a])
        else:
            down.append((int(parent[b]), b))
            b = int(parent[b])
    return up + down[::-1]


def cycle_laplacian(dec: TreeCycleDecomposition) -> np.ndarray:
    """``Q Q^T``: diagonal ``|O_k| - 1``, off-diagonal ``+-|O_k & O_l|``."""
    if dec.c == 0:
        raise EmptyCycleSpace("a tree has an empty cycle space")
    return dec.Q @ dec.Q.T


@dataclass(frozen=True)
class CycleStats:
    mu: float
    delta: int
    lengths: np.ndarray
    disjoint_flag: bool


def cycle_stats(dec: TreeCycleDecomposition) -> CycleStats:
    """Mean excess cycle length ``mu`` and the overlap measure ``delta``.

    ``mu = sum_k (|O_k| - 1) / (n - 1)`` and
    ``delta = max_k (|O_k| + sum_{l != k} |O_k & O_l|)``, with intersections
    counted in shared edges.
    """
    support = (dec.Z != 0).astype(np.int64)
    lengths = support.sum(axis=1)
    if dec.c == 0:
        return CycleStats(0.0, 0, lengths, True)
    overlap = support @ support.T
    np.fill_diagonal(overlap, 0)
    delta = int(np.max(lengths + overlap.sum(axis=1)))
    mu = float(np.sum(lengths - 1)) / (dec.n - 1)
    return CycleStats(mu, delta, lengths, not overlap.any())

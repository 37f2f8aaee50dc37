"""Benchmark graph families and a hand-built mixed-sign coupling matrix."""

from __future__ import annotations

from collections import Counter

import numpy as np

from .graph import OrientedNetwork


def _check_n(n: int) -> None:
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")


def path(n: int) -> OrientedNetwork:
    _check_n(n)
    i = np.arange(n - 1)
    return OrientedNetwork(n, np.column_stack([i, i + 1]))


def complete(n: int) -> OrientedNetwork:
    _check_n(n)
    return OrientedNetwork(n, np.column_stack(np.triu_indices(n, 1)))


def star(n: int) -> OrientedNetwork:
    """Hub at vertex 0 joined to every other vertex."""
    _check_n(n)
    return OrientedNetwork(n, tuple((0, j) for j in range(1, n)))


def cycle_power(n: int, d: int) -> OrientedNetwork:
    """Ring where each vertex links to its ``d/2`` nearest neighbours on each side."""
    if d % 2 or d < 2 or d >= n:
        raise ValueError(f"need even d with 2 <= d < n, got n={n}, d={d}")
    edges = set()
    for i in range(n):
        for j in range(1, d // 2 + 1):
            k = (i + j) % n
            edges.add((min(i, k), max(i, k)))
    return OrientedNetwork(n, tuple(sorted(edges)))


def random_bipartite_permutation(m: int, d: int, seed: int, duplicates: str = "weight") -> OrientedNetwork:
    """Bipartite graph on ``2m`` vertices built from ``d`` random permutations.

    Each round draws a uniform permutation ``p`` and joins ``i`` to
    ``m + p(i)``.  Pairs produced by more than one round become a single
    edge; with ``duplicates="weight"`` its conductance is the multiplicity
    (the Laplacian equals that of the d-regular multigraph), with
    ``"collapse"`` it stays 1.
    """
    if m < 2 or d < 1:
        raise ValueError(f"need m >= 2 and d >= 1, got m={m}, d={d}")
    if duplicates not in ("weight", "collapse"):
        raise ValueError(f"duplicates must be 'weight' or 'collapse', got {duplicates!r}")
    rng = np.random.default_rng(seed)
    counts: Counter[tuple[int, int]] = Counter()
    for _ in range(d):
        p = rng.permutation(m)
        counts.update((i, m + int(p[i])) for i in range(m))
    edges = sorted(counts)
    if duplicates == "weight":
        cond = np.array([counts[e] for e in edges], dtype=float)
    else:
        cond = np.ones(len(edges))
    return OrientedNetwork(2 * m, tuple(edges), cond)


_EXAMPLE_38 = (
    (-1.0251, 2.2043, -1.6032, 0.5044, -0.0804),
    (-0.1264, 0.2772, -0.3006, 0.2060, -0.0562),
    (-1.1549, 2.5819, -1.9613, 0.5210, 0.0133),
    (-0.8807, 1.9231, -1.0823, 0.0333, 0.0066),
    (-0.9049, 1.8778, -1.0060, 0.3772, -0.3441),
)


def example_matrix_38() -> np.ndarray:
    """5x5 zero-row-sum coupling with roughly half its entries negative.

    Printed to four decimals; the rows still sum to zero in floating point.
    The protocol it defines converges.
    """
    return np.array(_EXAMPLE_38)


FAMILIES = ("path", "complete", "star", "cycle-power", "bipartite-perm")

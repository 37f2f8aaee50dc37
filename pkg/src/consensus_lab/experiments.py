"""Graph corpora and the regular-vs-random convergence table."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .generators import complete, cycle_power, path, random_bipartite_permutation, star
from .graph import OrientedNetwork
from .spectral import alon_boppana, alpha_rho

TABLE_SIZES = (100, 200, 400)
TABLE_DEGREE = 4
TABLE_SEEDS = 41
PUBLISHED_CYCLE = {100: 0.020, 200: 0.005, 400: 0.001}
PUBLISHED_BIPARTITE = {100: 0.597, 200: 0.554, 400: 0.547}


def random_connected_network(rng: np.random.Generator, n: int, extra: int, weights: str = "unit") -> OrientedNetwork:
    """Random spanning tree plus up to ``extra`` random chords, random orientations.

    ``weights`` is ``"unit"`` or ``"signed"`` (conductances drawn from
    ``U(-1, 2)``).
    """
    perm = rng.permutation(n)
    pairs = set()
    for i in range(1, n):
        j = int(rng.integers(i))
        a, b = int(perm[i]), int(perm[j])
        pairs.add((min(a, b), max(a, b)))
    max_edges = n * (n - 1) // 2
    tries = 0
    while len(pairs) < min(n - 1 + extra, max_edges) and tries < 50 * (extra + 1):
        a, b = (int(v) for v in rng.choice(n, size=2, replace=False))
        pairs.add((min(a, b), max(a, b)))
        tries += 1
    edges = sorted(pairs)
    flip = rng.random(len(edges)) < 0.5
    edges = tuple((b, a) if f else (a, b) for (a, b), f in zip(edges, flip))
    if weights == "unit":
        cond = np.ones(len(edges))
    else:
        cond = rng.uniform(-1.0, 2.0, size=len(edges))
    return OrientedNetwork(n, edges, cond)


def random_cactus(rng: np.random.Generator, n_cycles: int, max_len: int = 7, pendants: int = 3) -> OrientedNetwork:
    """Connected graph whose cycles are pairwise edge-disjoint.

    Every spanning tree of such a graph yields exactly these cycles as its
    fundamental cycles.
    """
    edges: list[tuple[int, int]] = []
    n = 1
    for _ in range(n_cycles):
        anchor = int(rng.integers(n))
        length = int(rng.integers(3, max_len + 1))
        ring = [anchor] + list(range(n, n + length - 1))
        n += length - 1
        edges += [(ring[i], ring[(i + 1) % length]) for i in range(length)]
    for _ in range(pendants):
        edges.append((int(rng.integers(n)), n))
        n += 1
    perm = rng.permutation(n)
    edges = [(int(perm[a]), int(perm[b])) for a, b in edges]
    flip = rng.random(len(edges)) < 0.5
    return OrientedNetwork(n, tuple((b, a) if f else (a, b) for (a, b), f in zip(edges, flip)))


def family_corpus() -> list[tuple[str, OrientedNetwork]]:
    nets = []
    for n in (3, 4, 6, 10, 17):
        nets += [(f"path({n})", path(n)), (f"complete({n})", complete(n)), (f"star({n})", star(n))]
    for n, d in ((5, 2), (8, 4), (12, 6), (30, 4), (50, 8)):
        nets.append((f"cycle_power({n},{d})", cycle_power(n, d)))
    return nets


def graph_corpus(count: int = 200, seed: int = 0) -> list[tuple[str, OrientedNetwork]]:
    """Seeded random connected simple graphs plus the standard families."""
    rng = np.random.default_rng(seed)
    nets = []
    for i in range(count):
        n = int(rng.integers(3, 31))
        extra = int(rng.integers(0, 2 * n))
        nets.append((f"random[{i}]", random_connected_network(rng, n, extra)))
    return nets + family_corpus()


@dataclass(frozen=True)
class ExpanderTable:
    sizes: tuple[int, ...]
    cycle_alpha: dict[int, float]
    bipartite_alpha: dict[int, np.ndarray]
    limit: float

    def bipartite_median(self, n: int) -> float:
        return float(np.median(self.bipartite_alpha[n]))

    def rows(self) -> list[list]:
        """CSV rows: quantity, one column per size, then the n -> inf limit."""
        return [
            ["alpha_cycle_power"] + [self.cycle_alpha[n] for n in self.sizes] + [0.0],
            ["alpha_bipartite_median"] + [self.bipartite_median(n) for n in self.sizes] + [self.limit],
            ["alpha_bipartite_min"] + [float(self.bipartite_alpha[n].min()) for n in self.sizes] + [self.limit],
            ["alpha_bipartite_max"] + [float(self.bipartite_alpha[n].max()) for n in self.sizes] + [self.limit],
        ]

    def header(self) -> list[str]:
        return ["quantity"] + [str(n) for n in self.sizes] + ["inf"]


def expander_table(
    sizes=TABLE_SIZES, d: int = TABLE_DEGREE, seeds: int = TABLE_SEEDS, base_seed: int = 0
) -> ExpanderTable:
    """Algebraic connectivity of the ``d``-regular ring vs random bipartite graphs.

    ``B_n`` has ``n`` vertices, i.e. ``m = n/2`` per side.  Seeds are
    ``base_seed, ..., base_seed + seeds - 1``.
    """
    cyc, bip = {}, {}
    for n in sizes:
        cyc[n] = alpha_rho(cycle_power(n, d).coupling_matrix())[0]
        bip[n] = np.array([
            alpha_rho(random_bipartite_permutation(n // 2, d, base_seed + s).coupling_matrix())[0]
            for s in range(seeds)
        ])
    return ExpanderTable(tuple(sizes), cyc, bip, alon_boppana(d))

"""Convergence classification and stability measures.

``alpha`` is the decay rate of the slowest transverse mode, ``rho`` the sum
of inverse nonzero eigenvalues of ``-D`` (total effective resistance for
simple graphs) and ``kappa`` the trace of ``(I + Q^T Q)^{-1}`` built from the
cycle incidence matrix.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import trapezoid

from .errors import MultipleZeroEVs, NotConvergent
from .graph import (
    OrientedNetwork,
    TreeCycleDecomposition,
    cycle_stats,
    diameter,
    spanning_tree_decomposition,
)
from .pseudosim import ReductionMap, default_map, eigenvalues, reduce

STABILITY_EPS = 1e-10


@dataclass(frozen=True)
class StabilityBounds:
    """Graph-theoretic bounds for a connected simple undirected network.

    ``rho_upper`` uses the effective resistance of the spanning tree in the
    first branch of the minimum; see :func:`stability_bounds`.
    """

    alpha_lower: float
    rho_upper: float
    kappa_lower: float
    kappa_upper: float
    alon_boppana: float
    diameter_bound: float
    degree: int
    regular: bool
    diameter: float
    alpha_tree: float
    rho_tree: float


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues_D: np.ndarray
    alpha: float
    rho: float | None
    kappa: float | None
    convergent: bool
    dissipativity_margin: float
    bounds: StabilityBounds | None

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "rho": self.rho,
            "kappa": self.kappa,
            "convergent": self.convergent,
            "margin": self.dissipativity_margin,
            "bounds": None if self.bounds is None else asdict(self.bounds),
            "eigenvalues": [
                {"re": float(z.real), "im": float(z.imag)} for z in self.eigenvalues_D
            ],
        }


class Convergence(NamedTuple):
    convergent: bool
    alpha: float


def _threshold(D: np.ndarray) -> float:
    return STABILITY_EPS * max(1.0, float(np.linalg.norm(D, 2)))


def classify_convergent(D: np.ndarray, rmap: ReductionMap | None = None) -> Convergence:
    """Convergent iff every eigenvalue of ``D_hat`` has real part below
    ``-1e-10 * max(1, ||D||)``.  ``alpha = -max Re`` over that spectrum."""
    D = np.asarray(D, dtype=float)
    red = reduce(D, rmap).D_hat
    lam = eigenvalues(red)
    top = float(np.max(lam.real))
    return Convergence(top < -_threshold(D), -top)


def classify_undirected(dec: TreeCycleDecomposition) -> bool:
    """Positive definiteness of ``C1 + Q^T C2 Q`` for the chosen tree."""
    M = dec.tree_gram()
    lam = np.linalg.eigvalsh(M)
    return bool(lam[0] > STABILITY_EPS * max(1.0, float(np.abs(lam).max())))


def _is_normal(D: np.ndarray) -> bool:
    comm = D @ D.T - D.T @ D
    return float(np.linalg.norm(comm)) <= 1e-10 * max(1.0, float(np.linalg.norm(D)) ** 2)


def alpha_rho(D: np.ndarray) -> tuple[float, float]:
    """Algebraic connectivity and total effective resistance of ``-D``.

    For symmetric ``D`` these are the second-smallest eigenvalue of ``-D``
    and the sum of inverse eigenvalues beyond the first.  Normal ``D`` is
    handled through its symmetric part, whose eigenvalues are the real parts
    of those of ``D``.
    """
    D = np.asarray(D, dtype=float)
    if not np.array_equal(D, D.T):
        if not _is_normal(D):
            raise ValueError("alpha_rho needs a symmetric or normal coupling matrix")
        D = 0.5 * (D + D.T)
    lam = np.linalg.eigvalsh(-D)
    tol = STABILITY_EPS * max(1.0, float(np.abs(lam).max())) * D.shape[0]
    # the eigenvalue nearest zero belongs to the consensus direction
    k = int(np.argmin(np.abs(lam)))
    rest = np.delete(lam, k)
    if rest.size and np.min(np.abs(rest)) <= tol:
        raise MultipleZeroEVs("zero is a repeated eigenvalue of -D")
    if rest.size and rest.min() < 0:
        raise NotConvergent(f"-D has a negative eigenvalue {rest.min():.6g}")
    return float(rest.min()), float(np.sum(1.0 / rest))


def kappa(dec: TreeCycleDecomposition) -> float:
    """``Tr (I + Q^T Q)^{-1}`` via the eigenvalues of ``Q^T Q``."""
    Q = dec.Q.astype(float)
    lam = np.linalg.eigvalsh(Q.T @ Q) if dec.n > 1 else np.zeros(0)
    return float(np.sum(1.0 / (1.0 + lam)))


def alon_boppana(d: float) -> float:
    """``g(d) = d - 2 sqrt(d - 1)``, the large-n ceiling for d-regular graphs."""
    return d - 2.0 * math.sqrt(d - 1)


def diameter_alpha_bound(n: int, d: int, diam: float) -> float:
    """``2 d (2 log2 n / diam)^2``, an upper bound on alpha for degree ``d``."""
    return 2.0 * d * (2.0 * math.log2(n) / diam) ** 2


def stability_bounds(dec: TreeCycleDecomposition) -> StabilityBounds:
    """Tree/cycle bounds on alpha, rho and kappa of a simple connected network.

    With ``B = I + Q^T Q`` and ``T = H~ H~^T`` (whose spectrum is the nonzero
    Laplacian spectrum of the spanning tree):

    * ``alpha >= alpha_tree * lambda_min(B)``
    * ``rho <= min(rho_tree / lambda_min(B), Tr B^{-1} / alpha_tree)``
    * ``(n-1)/(1+mu) <= kappa <= n-1``, and when ``0 < c < n-1`` also
      ``kappa >= n - 1 - c + c/delta``.

    The first branch of the ``rho`` bound carries the tree resistance
    ``rho_tree = Tr T^{-1}``; replacing it by ``n - 1`` does not give a valid
    bound (``rho`` of the 10-vertex path is 16.5).
    """
    n, c = dec.n, dec.c
    Ht = dec.H_tilde.astype(float)
    Q = dec.Q.astype(float)
    T = Ht @ Ht.T
    B = np.eye(n - 1) + Q.T @ Q
    t_eig = np.linalg.eigvalsh(T)
    b_eig = np.linalg.eigvalsh(B)
    alpha_tree = float(t_eig[0])
    rho_tree = float(np.sum(1.0 / t_eig))
    kap = float(np.sum(1.0 / b_eig))

    stats = cycle_stats(dec)
    kappa_lower = (n - 1) / (1.0 + stats.mu)
    if 0 < c < n - 1:
        kappa_lower = max(kappa_lower, n - 1 - c + c / stats.delta)

    net = OrientedNetwork(n, dec.edges)
    deg = net.degrees()
    d = int(deg.max())
    diam = diameter(net)
    return StabilityBounds(
        alpha_lower=alpha_tree * float(b_eig[0]),
        rho_upper=min(rho_tree / float(b_eig[0]), kap / alpha_tree),
        kappa_lower=float(kappa_lower),
        kappa_upper=float(n - 1),
        alon_boppana=alon_boppana(d) if d >= 1 else float("nan"),
        diameter_bound=diameter_alpha_bound(n, d, diam) if diam > 0 else float("inf"),
        degree=d,
        regular=bool(np.all(deg == d)),
        diameter=diam,
        alpha_tree=alpha_tree,
        rho_tree=rho_tree,
    )


def dissipativity_margin(D_hat: np.ndarray) -> float:
    """``-lambda_max`` of the symmetric part of ``D_hat``.

    A positive value is a uniform decay rate for ``|y|``.  A stable but
    strongly non-normal ``D_hat`` can have a non-positive margin.
    """
    D_hat = np.asarray(D_hat, dtype=float)
    if D_hat.size == 0:
        return float("inf")
    return -float(np.linalg.eigvalsh(0.5 * (D_hat + D_hat.T))[-1])


def asymptotic_dissipativity_estimate(schedule, T: float, dt: float) -> float:
    """Time average over ``[0, T]`` of ``lambda_max`` of the symmetric part
    of the reduced coupling, by the trapezoid rule with step ``dt``.

    A negative result means the schedule contracts on average.
    """
    if not (T > 0 and dt > 0) or dt > T:
        raise ValueError(f"need 0 < dt <= T, got T={T}, dt={dt}")
    steps = int(round(T / dt))
    times = np.linspace(0.0, T, steps + 1)
    rmap = default_map(schedule.n)
    gamma = np.array([-dissipativity_margin(rmap.S @ schedule.coupling(t) @ rmap.S_plus) for t in times])
    return float(trapezoid(gamma, times) / T)


def analyze(net: OrientedNetwork) -> SpectralReport:
    """Full spectral report for a network.

    ``rho`` is reported for convergent networks with symmetric or normal
    coupling, ``kappa`` and ``bounds`` only for connected simple undirected
    networks.
    """
    D = net.coupling_matrix()
    rmap = default_map(net.n)
    D_hat = reduce(D, rmap).D_hat
    conv = classify_convergent(D, rmap)
    margin = dissipativity_margin(D_hat)

    rho = None
    symmetric_like = not net.directed or _is_normal(D)
    if conv.convergent and symmetric_like:
        _, rho = alpha_rho(D)

    kap = bounds = None
    if net.is_simple and net.is_connected() and net.n > 1:
        dec = spanning_tree_decomposition(net)
        kap = kappa(dec)
        bounds = stability_bounds(dec)
    return SpectralReport(
        eigenvalues_D=eigenvalues(D),
        alpha=conv.alpha,
        rho=rho,
        kappa=kap,
        convergent=conv.convergent,
        dissipativity_margin=margin,
        bounds=bounds,
    )

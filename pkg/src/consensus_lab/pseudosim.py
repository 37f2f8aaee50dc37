"""Reduction of a zero-row-sum matrix to the complement of the consensus line.

Given ``D`` with ``D e = 0`` and an intertwiner ``S`` whose kernel is
``span{e}``, the reduced matrix ``D_hat = S D S^+`` satisfies
``S D = D_hat S`` and carries every eigenvalue of ``D`` except one zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import expm

from .errors import NotZeroRowSum, RankDeficientIntertwiner


@dataclass(frozen=True)
class ReductionMap:
    """Intertwiner ``S_tilde``, its row-orthonormal version ``S`` and ``S^+``."""

    S_tilde: np.ndarray
    S: np.ndarray
    S_plus: np.ndarray

    @property
    def n(self) -> int:
        return self.S.shape[1]

    def projector(self) -> np.ndarray:
        """Orthogonal projector onto the complement of ``span{e}``."""
        return self.S.T @ self.S


@dataclass(frozen=True)
class ReducedMatrix:
    D_hat: np.ndarray
    source_dim: int


def difference_intertwiner(n: int) -> np.ndarray:
    """First-difference matrix with rows ``(..., -1, 1, ...)``."""
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    S = np.zeros((n - 1, n))
    idx = np.arange(n - 1)
    S[idx, idx] = -1.0
    S[idx, idx + 1] = 1.0
    return S


def normalize(S_tilde: np.ndarray) -> ReductionMap:
    """Return ``S = (S~ S~^T)^{-1/2} S~`` together with ``S^+``.

    The inverse square root comes from a symmetric eigendecomposition of the
    Gram matrix ``S~ S~^T``, which is positive definite when ``S~`` has full
    row rank.
    """
    S_tilde = np.asarray(S_tilde, dtype=float)
    rows, n = S_tilde.shape
    if rows != n - 1:
        raise ValueError(f"intertwiner must be (n-1) x n, got {S_tilde.shape}")
    sv = np.linalg.svd(S_tilde, compute_uv=False)
    if sv[-1] < 1e-10 * sv[0]:
        raise RankDeficientIntertwiner(f"sigma_min/sigma_max = {sv[-1] / sv[0]:.3e}")
    if np.linalg.norm(S_tilde.sum(axis=1)) > 1e-10 * sv[0] * np.sqrt(n):
        raise ValueError("intertwiner must annihilate the all-ones vector")

    w, V = np.linalg.eigh(S_tilde @ S_tilde.T)
    if w[0] < 1e-12 * w[-1]:
        raise RankDeficientIntertwiner(f"Gram matrix eigenvalue {w[0]:.3e} below floor")
    inv_sqrt = (V / np.sqrt(w)) @ V.T
    S = inv_sqrt @ S_tilde
    # S S^T = I, so the pseudo-inverse is the transpose
    return ReductionMap(S_tilde=S_tilde, S=S, S_plus=S.T.copy())


def default_map(n: int) -> ReductionMap:
    return normalize(difference_intertwiner(n))


def check_zero_row_sum(D: np.ndarray) -> None:
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    residual = np.linalg.norm(D.sum(axis=1))
    if residual > 1e-10 * np.linalg.norm(D, 2) * np.sqrt(n):
        raise NotZeroRowSum(f"|D e| = {residual:.3e}")


def reduce(D: np.ndarray, rmap: ReductionMap | None = None) -> ReducedMatrix:
    """Pseudo-similar matrix ``D_hat = S D S^+`` of a zero-row-sum ``D``."""
    D = np.asarray(D, dtype=float)
    check_zero_row_sum(D)
    if rmap is None:
        rmap = default_map(D.shape[0])
    D_hat = rmap.S @ D @ rmap.S_plus
    if np.array_equal(D, D.T):
        D_hat = 0.5 * (D_hat + D_hat.T)
    return ReducedMatrix(D_hat=D_hat, source_dim=D.shape[0])


def eigenvalues(M: np.ndarray) -> np.ndarray:
    """Complex eigenvalue multiset, using the symmetric solver when exact."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return np.zeros(0, dtype=complex)
    if np.array_equal(M, M.T):
        return np.linalg.eigvalsh(M).astype(complex)
    return np.linalg.eigvals(M)


def pair_eigenvalues(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float]:
    """Greedy nearest-neighbour matching of ``a`` into ``b``.

    Returns the indices of ``b`` used for each entry of ``a`` and the
    largest pairing distance.  Greedy matching is a heuristic; it is exact
    whenever clusters are separated by more than the eigenvalue error.
    """
    free = np.ones(len(b), dtype=bool)
    used = np.empty(len(a), dtype=int)
    worst = 0.0
    for i, z in enumerate(a):
        dist = np.where(free, np.abs(b - z), np.inf)
        j = int(np.argmin(dist))
        used[i] = j
        free[j] = False
        worst = max(worst, float(dist[j]))
    return used, worst


class SpectrumSplit(NamedTuple):
    full: np.ndarray
    reduced: np.ndarray
    removed: complex
    pairing_error: float
    zero_in_reduced: bool


def spectrum_split(D: np.ndarray, rmap: ReductionMap | None = None, tol: float = 1e-8) -> SpectrumSplit:
    """Spectra of ``D`` and ``D_hat`` with the discarded zero identified.

    ``pairing_error`` is the largest distance between an eigenvalue of
    ``D_hat`` and its partner in the spectrum of ``D``; the unpaired
    eigenvalue of ``D`` is reported as ``removed`` and should be zero.
    """
    D = np.asarray(D, dtype=float)
    red = reduce(D, rmap).D_hat
    full = eigenvalues(D)
    reduced = eigenvalues(red)
    used, worst = pair_eigenvalues(reduced, full)
    left = np.setdiff1d(np.arange(len(full)), used)
    removed = complex(full[left[0]])
    scale = max(1.0, float(np.linalg.norm(D, 2)))
    zero_in_reduced = bool(np.any(np.abs(reduced) <= tol * scale))
    return SpectrumSplit(full, reduced, removed, worst, zero_in_reduced)


def exp_commutation_check(D: np.ndarray, t: float, rmap: ReductionMap | None = None) -> float:
    """``|| exp(t D_hat) - S exp(t D) S^+ ||_2`` (zero in exact arithmetic)."""
    D = np.asarray(D, dtype=float)
    if rmap is None:
        rmap = default_map(D.shape[0])
    D_hat = reduce(D, rmap).D_hat
    lhs = expm(t * D_hat)
    rhs = rmap.S @ expm(t * D) @ rmap.S_plus
    return float(np.linalg.norm(lhs - rhs, 2))

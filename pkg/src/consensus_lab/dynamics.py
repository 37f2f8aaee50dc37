"""Deterministic and noise-driven consensus dynamics.

The protocol is ``dx = g D(t) x dt + sigma U(t) dW``.  Deterministic runs
use exact exponential stepping for constant couplings and classical RK4
otherwise; ensembles use Euler-Maruyama.  The first two moments of the
reduced state ``y = S x`` obey linear ODEs that are integrated with the same
RK4 scheme and serve as the reference for Monte Carlo output.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.linalg import expm

from .errors import (
    IntegrationBlowUp,
    NotConvergent,
    NotNormal,
    NotZeroRowSum,
    PreconditionNotDissipative,
)
from .pseudosim import default_map, reduce
from .rng import CounterStream, block_ranges
from .spectral import classify_convergent, dissipativity_margin

BLOWUP_NORM = 1e12
DT_SCALE = 1e-3
DT_STABLE_SCALE = 1e-1
MAX_DEFAULT_STEPS = 50_000
TARGET_RECORDS = 100

Matrix = np.ndarray


def _zero_row_sum_ok(D: Matrix) -> bool:
    return float(np.linalg.norm(D.sum(axis=1))) <= 1e-10 * max(float(np.linalg.norm(D, 2)), 1e-300)


@dataclass
class CouplingSchedule:
    """Time-dependent coupling ``D(t)``, noise loading ``U(t)``, gain and noise level.

    Use :meth:`constant` or :meth:`switching` for the common cases; a bare
    callable ``D_of_t`` is checked for zero row sums every time it is
    evaluated.
    """

    n: int
    D_of_t: Callable[[float], Matrix]
    U_of_t: Callable[[float], Matrix] | None = None
    gain: float = 1.0
    sigma: float = 0.0
    matrix: Matrix | None = None
    switch_times: np.ndarray | None = None
    checked: bool = False
    _scaled: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.gain < 0 or self.sigma < 0:
            raise ValueError("gain and sigma must be non-negative")

    @classmethod
    def constant(cls, D, sigma=0.0, gain=1.0, U=None) -> "CouplingSchedule":
        D = np.array(D, dtype=float)
        if not _zero_row_sum_ok(D):
            raise NotZeroRowSum("coupling matrix must annihilate the all-ones vector")
        return cls(D.shape[0], lambda t: D, _loading(U), gain, sigma, matrix=D, checked=True)

    @classmethod
    def switching(cls, matrices, period, fractions=None, sigma=0.0, gain=1.0, U=None) -> "CouplingSchedule":
        """Cycle through ``matrices`` with period ``period``.

        ``fractions`` gives the share of each period spent on each matrix
        (equal dwell by default).  The schedule is right-continuous.
        """
        mats = [np.array(M, dtype=float) for M in matrices]
        if not mats or any(M.ndim != 2 or M.shape != (mats[0].shape[0],) * 2 for M in mats):
            raise ValueError("switched couplings must be square matrices of one size")
        for M in mats:
            if not _zero_row_sum_ok(M):
                raise NotZeroRowSum("every switched coupling must annihilate the all-ones vector")
        k = len(mats)
        frac = np.full(k, 1.0 / k) if fractions is None else np.asarray(fractions, dtype=float)
        if period <= 0 or len(frac) != k or np.any(frac <= 0):
            raise ValueError("need a positive period and one positive fraction per matrix")
        edges = np.concatenate([[0.0], np.cumsum(frac / frac.sum())]) * period

        def D_of_t(t):
            phase = math.fmod(t, period)
            idx = int(np.searchsorted(edges, phase, side="right")) - 1
            return mats[min(idx, k - 1)]

        return cls(mats[0].shape[0], D_of_t, _loading(U), gain, sigma, switch_times=edges, checked=True)

    @property
    def is_constant(self) -> bool:
        return self.matrix is not None

    @property
    def piecewise_constant(self) -> bool:
        return self.switch_times is not None

    def coupling(self, t: float) -> Matrix:
        """Effective coupling ``g D(t)``."""
        D = self.D_of_t(t)
        if self.checked:
            # stored matrices: reuse one scaled copy so callers can compare by identity
            hit = self._scaled.get(id(D))
            if hit is None or hit[0] is not D:
                hit = (D, self.gain * D)
                self._scaled[id(D)] = hit
            return hit[1]
        D = np.asarray(D, dtype=float)
        if not _zero_row_sum_ok(D):
            raise NotZeroRowSum(f"D(t) e != 0 at t={t}")
        return self.gain * D

    def loading(self, t: float) -> Matrix | None:
        return None if self.U_of_t is None else self.U_of_t(t)

    def stage_couplings(self, t: float, h: float) -> tuple[Matrix, Matrix, Matrix]:
        """Couplings at the start, midpoint and end of a step.

        Piecewise-constant schedules are sampled just inside the step so that
        a switch on the step boundary does not leak into it.
        """
        if self.piecewise_constant:
            eps = 1e-9 * h
            return self.coupling(t + eps), self.coupling(t + 0.5 * h), self.coupling(t + h - eps)
        return self.coupling(t), self.coupling(t + 0.5 * h), self.coupling(t + h)

    def sample_times(self, T: float, k: int = 257) -> np.ndarray:
        times = np.linspace(0.0, T, k)
        if self.piecewise_constant:
            period = self.switch_times[-1]
            mids = 0.5 * (self.switch_times[:-1] + self.switch_times[1:])
            times = np.concatenate([times, mids[mids <= T]]) if period > 0 else times
        return times

    def max_norm(self, T: float) -> float:
        if self.is_constant:
            return float(np.linalg.norm(self.coupling(0.0), 2))
        return max(float(np.linalg.norm(self.coupling(t), 2)) for t in self.sample_times(T))

    def default_dt(self, T: float) -> float:
        """``1e-3 / s`` with ``s = max(1, max_t ||g D(t)||)``.

        Long horizons are coarsened to at most ``MAX_DEFAULT_STEPS`` steps,
        but never beyond ``0.1 / s``, which keeps every mode of the
        Euler-Maruyama map well inside its stability region.
        """
        s = max(1.0, self.max_norm(T))
        return min(max(DT_SCALE / s, T / MAX_DEFAULT_STEPS), DT_STABLE_SCALE / s)


def _loading(U):
    if U is None:
        return None
    if callable(U):
        return U
    U = np.array(U, dtype=float)
    return lambda t: U


def _grid(T: float, dt: float | None, schedule: CouplingSchedule) -> tuple[int, float]:
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    if dt is None:
        dt = schedule.default_dt(T)
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    steps = max(1, int(math.ceil(T / dt - 1e-9)))
    return steps, T / steps


def _record_steps(steps: int, record_every: int | None) -> np.ndarray:
    if record_every is None:
        record_every = max(1, steps // TARGET_RECORDS)
    idx = np.arange(0, steps + 1, record_every)
    if idx[-1] != steps:
        idx = np.append(idx, steps)
    return idx


def off_consensus_norm(x: np.ndarray) -> np.ndarray:
    """``|P x|`` for the projector onto the complement of ``span{e}``.

    Equal to ``|S x|`` for any row-orthonormal intertwiner ``S``.
    """
    x = np.asarray(x, dtype=float)
    return np.linalg.norm(x - x.mean(axis=-1, keepdims=True), axis=-1)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    off_consensus: np.ndarray


def integrate_deterministic(schedule: CouplingSchedule, x0, T: float, dt: float | None = None) -> Trajectory:
    """Solve ``x' = g D(t) x`` on ``[0, T]``; ``sigma`` is ignored.

    The step is shrunk so that it divides ``T``.  Raises
    :class:`IntegrationBlowUp` if ``|x|`` exceeds ``1e12``.
    """
    x = np.array(x0, dtype=float)
    steps, h = _grid(T, dt, schedule)
    times = np.linspace(0.0, T, steps + 1)
    out = np.empty((steps + 1, x.size))
    out[0] = x
    if schedule.is_constant:
        P = expm(h * schedule.coupling(0.0))
        for k in range(steps):
            x = P @ x
            out[k + 1] = _guard(x, times[k + 1])
    else:
        for k in range(steps):
            A0, A1, A2 = schedule.stage_couplings(times[k], h)
            k1 = A0 @ x
            k2 = A1 @ (x + 0.5 * h * k1)
            k3 = A1 @ (x + 0.5 * h * k2)
            k4 = A2 @ (x + h * k3)
            x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            out[k + 1] = _guard(x, times[k + 1])
    return Trajectory(times, out, off_consensus_norm(out))


def _guard(x: np.ndarray, t: float) -> np.ndarray:
    norm = float(np.max(np.abs(x)))
    if not np.isfinite(norm) or norm > BLOWUP_NORM:
        raise IntegrationBlowUp(t, norm)
    return x


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Recorded states of independent realizations.

    ``paths`` has shape ``(len(times), n_paths, n)``.
    """

    times: np.ndarray
    paths: np.ndarray
    seed: int
    dt: float

    @property
    def n_paths(self) -> int:
        return self.paths.shape[1]

    def off_consensus_sq(self) -> np.ndarray:
        x = self.paths
        return np.sum((x - x.mean(axis=-1, keepdims=True)) ** 2, axis=-1)

    def mean_off_consensus_sq(self) -> tuple[np.ndarray, np.ndarray]:
        """Ensemble mean of ``|P x(t)|^2`` and its standard error per record."""
        sq = self.off_consensus_sq()
        se = sq.std(axis=1, ddof=1) / math.sqrt(self.n_paths) if self.n_paths > 1 else np.zeros(len(sq))
        return sq.mean(axis=1), se

    def reduced(self, S: np.ndarray | None = None) -> np.ndarray:
        if S is None:
            S = default_map(self.paths.shape[2]).S
        return self.paths @ S.T

    def late_window_average(self, start_fraction: float = 0.8) -> tuple[float, float]:
        """Average of ``|P x|^2`` over ``t >= start_fraction * T``.

        The standard error treats the per-path time averages as independent.
        """
        T = self.times[-1]
        sel = self.times >= start_fraction * T - 1e-12
        per_path = self.off_consensus_sq()[sel].mean(axis=0)
        return float(per_path.mean()), float(per_path.std(ddof=1) / math.sqrt(len(per_path)))


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("CONSENSUS_LAB_THREADS", "1"))
    return max(1, int(threads))


def integrate_sde(
    schedule: CouplingSchedule,
    x0,
    T: float,
    dt: float | None = None,
    n_paths: int = 1000,
    seed: int = 0,
    record_every: int | None = None,
    threads: int | None = None,
) -> TrajectoryEnsemble:
    """Euler-Maruyama ensemble for ``dx = g D(t) x dt + sigma U(t) dW``.

    States are kept every ``record_every`` steps (about 100 records by
    default) plus the final step.  Results are bit-identical for any
    ``threads`` value.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    x0 = np.array(x0, dtype=float)
    n = x0.size
    steps, h = _grid(T, dt, schedule)
    rec = _record_steps(steps, record_every)
    out = np.empty((len(rec), n_paths, n))
    noise_scale = schedule.sigma * math.sqrt(h)

    def run_block(block: int, lo: int, hi: int):
        rows = hi - lo
        stream = CounterStream(seed, block)
        X = np.tile(x0, (rows, 1))
        xi = np.empty((rows, n))
        slot = 0
        if rec[0] == 0:
            out[0, lo:hi] = X
            slot = 1
        D_prev, Dt = None, None
        for k in range(steps):
            t = k * h
            D = schedule.coupling(t)
            if D is not D_prev:
                Dt = np.ascontiguousarray(h * D.T)
                D_prev = D
            drift = X @ Dt
            if noise_scale > 0.0:
                stream.normals(k, rows, n, out=xi)
                U = schedule.loading(t)
                X += drift + noise_scale * (xi if U is None else xi @ U.T)
            else:
                X += drift
            if slot < len(rec) and rec[slot] == k + 1:
                peak = float(np.max(np.abs(X)))
                if not np.isfinite(peak) or peak > BLOWUP_NORM:
                    raise IntegrationBlowUp((k + 1) * h, peak)
                out[slot, lo:hi] = X
                slot += 1

    blocks = [(i, lo, hi) for i, (lo, hi) in enumerate(block_ranges(n_paths))]
    workers = min(resolve_threads(threads), len(blocks))
    if workers == 1:
        for b in blocks:
            run_block(*b)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for fut in [pool.submit(run_block, *b) for b in blocks]:
                fut.result()
    return TrajectoryEnsemble(times=rec * h, paths=out, seed=seed, dt=h)


@dataclass(frozen=True)
class MomentTrajectory:
    """Mean and covariance of ``y = S x`` with the default intertwiner."""

    times: np.ndarray
    mean: np.ndarray
    cov: np.ndarray
    off_consensus_second_moment: np.ndarray


def integrate_moment_odes(
    schedule: CouplingSchedule,
    y0,
    T: float,
    dt: float | None = None,
    record_every: int | None = None,
) -> MomentTrajectory:
    """RK4 solution of ``m' = D_hat m`` and
    ``V' = D_hat V + V D_hat^T + sigma^2 S U U^T S^T`` from ``V(0) = 0``.

    With the same ``T``, ``dt`` and ``record_every`` the record times match
    those of :func:`integrate_sde`.
    """
    n = schedule.n
    rmap = default_map(n)
    S = rmap.S
    steps, h = _grid(T, dt, schedule)
    rec = _record_steps(steps, record_every)
    s2 = schedule.sigma ** 2

    def forcing(t):
        U = schedule.loading(t)
        if U is None:
            return s2 * (S @ S.T)
        SU = S @ U
        return s2 * (SU @ SU.T)

    def reduced(A):
        return S @ A @ S.T

    def rhs(Dh, F, m, V):
        return Dh @ m, Dh @ V + V @ Dh.T + F

    m = np.array(y0, dtype=float)
    V = np.zeros((n - 1, n - 1))
    means = np.empty((len(rec), n - 1))
    covs = np.empty((len(rec), n - 1, n - 1))
    slot = 0
    if rec[0] == 0:
        means[0], covs[0] = m, V
        slot = 1
    cache_src, cache = (None, None, None), None
    for k in range(steps):
        t = k * h
        A0, A1, A2 = schedule.stage_couplings(t, h)
        if not all(a is b for a, b in zip((A0, A1, A2), cache_src)):
            cache = (reduced(A0), reduced(A1), reduced(A2))
            cache_src = (A0, A1, A2)
        D0, D1, D2 = cache
        F0, F1, F2 = forcing(t), forcing(t + 0.5 * h), forcing(t + h)
        a_m, a_V = rhs(D0, F0, m, V)
        b_m, b_V = rhs(D1, F1, m + 0.5 * h * a_m, V + 0.5 * h * a_V)
        c_m, c_V = rhs(D1, F1, m + 0.5 * h * b_m, V + 0.5 * h * b_V)
        d_m, d_V = rhs(D2, F2, m + h * c_m, V + h * c_V)
        m = m + (h / 6.0) * (a_m + 2 * b_m + 2 * c_m + d_m)
        V = V + (h / 6.0) * (a_V + 2 * b_V + 2 * c_V + d_V)
        V = 0.5 * (V + V.T)
        if slot < len(rec) and rec[slot] == k + 1:
            _guard(np.concatenate([m, V.ravel()]), (k + 1) * h)
            means[slot], covs[slot] = m, V
            slot += 1
    second = np.einsum("ti,ti->t", means, means) + np.trace(covs, axis1=1, axis2=2)
    return MomentTrajectory(rec * h, means, covs, second)


class StationaryPrediction(NamedTuple):
    limit_cov: np.ndarray
    limit_second_moment: float


def stationary_prediction(D, sigma: float, gain: float = 1.0) -> StationaryPrediction:
    """Large-time covariance of ``S x`` and ``E|P x|^2`` for normal ``D``.

    ``limit_cov = (sigma^2 / 2) (-D_hat^s)^{-1}`` for the effective coupling
    ``gain * D``; its trace is ``(sigma^2 / 2) sum_i 1 / Re mu_i`` over the
    nonzero eigenvalues ``mu_i`` of ``-gain * D``.
    """
    D = gain * np.asarray(D, dtype=float)
    comm = D @ D.T - D.T @ D
    if np.linalg.norm(comm) > 1e-10 * max(1.0, float(np.linalg.norm(D)) ** 2):
        raise NotNormal(f"|D D^T - D^T D| = {np.linalg.norm(comm):.3e}")
    if not classify_convergent(D).convergent:
        raise NotConvergent("the reduced coupling is not stable")
    D_hat = reduce(D).D_hat
    neg_sym = -0.5 * (D_hat + D_hat.T)
    lam = np.linalg.eigvalsh(neg_sym)
    cov = 0.5 * sigma ** 2 * np.linalg.inv(neg_sym)
    return StationaryPrediction(0.5 * (cov + cov.T), float(0.5 * sigma ** 2 * np.sum(1.0 / lam)))


def _schedule_margin(schedule: CouplingSchedule, times) -> float:
    rmap = default_map(schedule.n)
    return min(dissipativity_margin(rmap.S @ schedule.coupling(t) @ rmap.S_plus) for t in times)


def uniform_bound(schedule: CouplingSchedule, T: float) -> float:
    """``sigma^2 n sup||U U^T|| / (2 alpha_g)`` where ``alpha_g`` is the
    smallest dissipativity margin of ``g D(t)`` sampled over ``[0, T]``."""
    times = schedule.sample_times(T)
    margin = _schedule_margin(schedule, times)
    if not margin > 0:
        raise PreconditionNotDissipative(f"sampled dissipativity margin {margin:.6g} <= 0")
    sup_uu = 1.0
    if schedule.U_of_t is not None:
        sup_uu = max(float(np.linalg.norm(schedule.loading(t) @ schedule.loading(t).T, 2)) for t in times)
    return schedule.sigma ** 2 * schedule.n * sup_uu / (2.0 * margin)


def uniform_bound_check(schedule: CouplingSchedule, ensemble: TrajectoryEnsemble, n_se: float = 5.0) -> bool:
    """Empirical ``E|P x(t)|^2`` stays below the dissipativity bound
    (plus ``n_se`` standard errors) at every recorded time."""
    bound = uniform_bound(schedule, float(ensemble.times[-1]))
    mean, se = ensemble.mean_off_consensus_sq()
    return bool(np.all(mean <= bound + n_se * se))


def fit_decay_rate(times, norms, t_min: float | None = None, t_max: float | None = None) -> float:
    """Least-squares exponential decay rate of ``norms`` on ``[t_min, t_max]``."""
    times = np.asarray(times, dtype=float)
    norms = np.asarray(norms, dtype=float)
    sel = np.ones(times.size, dtype=bool)
    if t_min is not None:
        sel &= times >= t_min
    if t_max is not None:
        sel &= times <= t_max
    sel &= norms > 0
    slope = np.polyfit(times[sel], np.log(norms[sel]), 1)[0]
    return float(-slope)

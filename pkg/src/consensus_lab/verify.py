"""Exit criteria of the package, runnable from the CLI or from pytest.

Each ``check_*`` function returns a list of :class:`CheckResult`.  Sizes can
be shrunk for a quick smoke run (``quick=True``); tolerances never change.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import experiments
from .dynamics import (
    CouplingSchedule,
    fit_decay_rate,
    integrate_deterministic,
    integrate_moment_odes,
    integrate_sde,
    stationary_prediction,
)
from .generators import complete, cycle_power, example_matrix_38, path, star
from .graph import cycle_stats, spanning_tree_decomposition
from .pseudosim import default_map, exp_commutation_check, reduce, spectrum_split
from .spectral import (
    alpha_rho,
    asymptotic_dissipativity_estimate,
    classify_convergent,
    dissipativity_margin,
    kappa,
    stability_bounds,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.passed))

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        results = fn(*args, **kwargs)
        dt = time.perf_counter() - t0
        return [CheckResult(r.name, r.passed, r.detail, dt) for r in results]

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


@_timed
def check_closed_form_spectra(quick: bool = False) -> list[CheckResult]:
    """alpha(P_n) = 4 sin^2(pi/2n), alpha(K_n) = n, n = 3..500, rel. err <= 1e-9, < 30 s."""
    t0 = time.perf_counter()
    n_max = 60 if quick else 500
    worst = 0.0
    for n in range(3, n_max + 1):
        worst = max(worst, _rel(alpha_rho(path(n).coupling_matrix())[0], 4 * math.sin(math.pi / (2 * n)) ** 2))
        worst = max(worst, _rel(alpha_rho(complete(n).coupling_matrix())[0], float(n)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 30.0
    return [CheckResult("1 closed-form spectra", ok, f"max rel err {worst:.2e} over n=3..{n_max}, {elapsed:.1f}s")]


@_timed
def check_effective_resistance(quick: bool = False) -> list[CheckResult]:
    """rho(P_n) = (n^2-1)/6, rho(K_n) = 1 - 1/n, n = 3..200, rel. err <= 1e-8."""
    n_max = 40 if quick else 200
    worst = 0.0
    for n in range(3, n_max + 1):
        worst = max(worst, _rel(alpha_rho(path(n).coupling_matrix())[1], (n * n - 1) / 6.0))
        worst = max(worst, _rel(alpha_rho(complete(n).coupling_matrix())[1], 1.0 - 1.0 / n))
    return [CheckResult("2 effective resistance", worst <= 1e-8, f"max rel err {worst:.2e} over n=3..{n_max}")]


@_timed
def check_expander_table(quick: bool = False) -> list[CheckResult]:
    """Regular ring vs random bipartite algebraic connectivity, d = 4."""
    t0 = time.perf_counter()
    seeds = 21 if quick else experiments.TABLE_SEEDS
    table = experiments.expander_table(seeds=seeds)
    elapsed = time.perf_counter() - t0
    g4 = table.limit
    out = []
    cyc = {n: round(table.cycle_alpha[n], 3) for n in table.sizes}
    out.append(CheckResult(
        "3a ring alpha rounds to table",
        all(math.isclose(cyc[n], experiments.PUBLISHED_CYCLE[n]) for n in table.sizes) and elapsed <= 300,
        f"rounded {cyc}",
    ))
    med = {n: table.bipartite_median(n) for n in table.sizes}
    out.append(CheckResult(
        "3b bipartite median within 0.03",
        all(abs(med[n] - experiments.PUBLISHED_BIPARTITE[n]) <= 0.03 for n in table.sizes),
        "medians " + ", ".join(f"{n}: {med[n]:.4f}" for n in table.sizes) + f" over {seeds} seeds",
    ))
    top = {n: float(table.bipartite_alpha[n].max()) for n in table.sizes}
    out.append(CheckResult(
        "3c every sample <= g(4)+0.05",
        all(top[n] <= g4 + 0.05 for n in table.sizes),
        "max " + ", ".join(f"{n}: {top[n]:.4f}" for n in table.sizes) + f" vs ceiling {g4 + 0.05:.4f}",
    ))
    freq = {n: float(np.mean(table.bipartite_alpha[n] >= g4 - 0.15)) for n in table.sizes}
    out.append(CheckResult(
        "3d frequency(alpha >= g(4)-0.15) >= 0.9",
        all(f >= 0.9 for f in freq.values()),
        f"frequencies {freq}",
    ))
    return out


def random_coupling(rng: np.random.Generator, n: int) -> np.ndarray:
    """Dense zero-row-sum matrix with N(0, 1/n) off-diagonal entries."""
    A = rng.normal(scale=1.0 / math.sqrt(n), size=(n, n))
    np.fill_diagonal(A, 0.0)
    return A - np.diag(A.sum(axis=1))


@_timed
def check_pseudosim(quick: bool = False) -> list[CheckResult]:
    """Spectrum split, intertwining identity and exponential commutation on random D."""
    rng = np.random.default_rng(20240401)
    count = 20 if quick else 100
    worst_pair = worst_zero = worst_comm = worst_exp = 0.0
    for i in range(count):
        n = 3 + i % 10
        D = random_coupling(rng, n)
        rmap = default_map(n)
        split = spectrum_split(D, rmap)
        worst_pair = max(worst_pair, split.pairing_error)
        worst_zero = max(worst_zero, abs(split.removed))
        D_hat = reduce(D, rmap).D_hat
        worst_comm = max(worst_comm, np.linalg.norm(rmap.S @ D - D_hat @ rmap.S, 2) / np.linalg.norm(D, 2))
        for t in (0.5, 1.0, 2.0):
            worst_exp = max(worst_exp, exp_commutation_check(D, t, rmap))
    return [
        CheckResult("4a spectrum pairing <= 1e-8", worst_pair <= 1e-8 and worst_zero <= 1e-8,
                    f"pairing {worst_pair:.2e}, removed |lambda| {worst_zero:.2e} over {count} matrices"),
        CheckResult("4b |SD - D_hat S| <= 1e-10 |D|", worst_comm <= 1e-10, f"relative residual {worst_comm:.2e}"),
        CheckResult("4c exp commutation <= 1e-8", worst_exp <= 1e-8, f"max residual {worst_exp:.2e} at t in (0.5, 1, 2)"),
    ]


@_timed
def check_cycle_machinery(quick: bool = False) -> list[CheckResult]:
    """Partition identity, kappa invariance, disjoint-cycle kappa, bound brackets."""
    rng = np.random.default_rng(7)
    corpus = experiments.graph_corpus(40 if quick else 200, seed=11)
    partition_ok, worst_orient = True, 0.0
    bracket_fail: list[str] = []
    for name, net in corpus:
        dec = spanning_tree_decomposition(net)
        n = net.n
        stacked = np.vstack([np.eye(n - 1, dtype=np.int64), -dec.Q]) @ dec.H_tilde
        partition_ok &= bool(np.array_equal(dec.H, stacked))
        k0 = kappa(dec)
        for _ in range(3):
            flipped = spanning_tree_decomposition(net.reoriented(rng.random(net.m) < 0.5))
            worst_orient = max(worst_orient, abs(kappa(flipped) - k0))
        alpha, rho = alpha_rho(net.coupling_matrix())
        b = stability_bounds(dec)
        if alpha < b.alpha_lower - 1e-9:
            bracket_fail.append(f"{name}: alpha")
        if rho > b.rho_upper + 1e-9:
            bracket_fail.append(f"{name}: rho")
        if not (b.kappa_lower - 1e-10 <= k0 <= b.kappa_upper + 1e-10):
            bracket_fail.append(f"{name}: kappa")
        if b.regular and alpha > b.diameter_bound + 1e-9:
            bracket_fail.append(f"{name}: diameter")

    worst_disjoint = 0.0
    for _ in range(20):
        net = experiments.random_cactus(rng, int(rng.integers(1, 6)))
        dec = spanning_tree_decomposition(net)
        stats = cycle_stats(dec)
        n, c = net.n, dec.c
        closed = n - 1 - c + float(np.sum(1.0 / np.asarray(stats.lengths, dtype=float)))
        worst_disjoint = max(worst_disjoint, abs(kappa(dec) - closed))
        if not stats.disjoint_flag:
            worst_disjoint = math.inf
    return [
        CheckResult("5a partition identity exact", partition_ok, f"{len(corpus)} graphs, integer arithmetic"),
        CheckResult("5b kappa orientation invariance", worst_orient <= 1e-10, f"max deviation {worst_orient:.2e}"),
        CheckResult("5c disjoint-cycle kappa", worst_disjoint <= 1e-10, f"max deviation {worst_disjoint:.2e} on 20 cacti"),
        CheckResult("5d bounds bracket corpus", not bracket_fail,
                    "all bracket" if not bracket_fail else "; ".join(bracket_fail[:5])),
    ]


STATIONARY_SIGMA = 0.1
STATIONARY_SEED = 2012


def stationary_run(net, n_paths: int, sigma: float = STATIONARY_SIGMA, gain: float = 1.0,
                   seed: int = STATIONARY_SEED, T: float | None = None, threads: int | None = None):
    """Ensemble and moment oracle for ``dx = g D x dt + sigma dW`` on ``net``.

    ``T`` defaults to ``10 / alpha`` of the ungained coupling.
    """
    D = net.coupling_matrix()
    alpha = alpha_rho(D)[0]
    T = 10.0 / alpha if T is None else T
    schedule = CouplingSchedule.constant(D, sigma=sigma, gain=gain)
    x0 = np.random.default_rng(seed).normal(scale=0.5, size=net.n)
    ens = integrate_sde(schedule, x0, T, n_paths=n_paths, seed=seed, threads=threads)
    moments = integrate_moment_odes(schedule, default_map(net.n).S @ x0, T)
    pred = stationary_prediction(D, sigma, gain).limit_second_moment
    return ens, moments, pred


def moment_agreement(ens, moments, n_se: float = 5.0) -> tuple[bool, float]:
    """Largest z-score of ensemble mean/covariance of ``S x`` against the oracle."""
    assert np.allclose(ens.times, moments.times)
    y = ens.reduced()
    N = y.shape[1]
    worst = 0.0
    ok = True
    for k in range(len(ens.times)):
        V = moments.cov[k]
        d = np.diag(V)
        mean_se = np.sqrt(d / N)
        mean_err = np.abs(y[k].mean(axis=0) - moments.mean[k])
        cov_hat = np.cov(y[k], rowvar=False, ddof=1) if N > 1 else np.zeros_like(V)
        cov_se = np.sqrt((np.outer(d, d) + V ** 2) / N)
        cov_err = np.abs(cov_hat - V)
        ok &= bool(np.all(mean_err <= n_se * mean_se + 1e-12) and np.all(cov_err <= n_se * cov_se + 1e-12))
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.concatenate([(mean_err / mean_se).ravel(), (cov_err / cov_se).ravel()])
        z = z[np.isfinite(z)]
        if z.size:
            worst = max(worst, float(z.max()))
    return ok, worst


@_timed
def check_stationary_law(quick: bool = False, threads: int | None = None) -> list[CheckResult]:
    """Late-window E|Px|^2 within 5% of prediction; ensemble vs moment oracle within 5 SE."""
    t0 = time.perf_counter()
    n_paths = 1000 if quick else 10_000
    out = []
    for label, net in (("K10", complete(10)), ("P10", path(10))):
        if quick and label == "P10":
            net = path(6)
            label = "P6"
        ens, moments, pred = stationary_run(net, n_paths, threads=threads)
        plateau, se = ens.late_window_average()
        rel = abs(plateau - pred) / pred
        out.append(CheckResult(f"6 {label} plateau within 5%", rel <= 0.05,
                               f"MC {plateau:.5f} +- {se:.5f} vs {pred:.5f} (rel {rel:.3%})"))
        ok, z = moment_agreement(ens, moments)
        out.append(CheckResult(f"6 {label} moments within 5 SE", ok, f"max z-score {z:.2f} over {len(ens.times)} records"))
    elapsed = time.perf_counter() - t0
    out.append(CheckResult("6 runtime <= 3 min", elapsed <= 180.0, f"{elapsed:.1f}s for both ensembles and oracles"))
    return out


@_timed
def check_gain_scaling(quick: bool = False, threads: int | None = None) -> list[CheckResult]:
    """Doubling the gain halves the stationary plateau (within 3 combined SE)."""
    n_paths = 2000 if quick else 10_000
    net = complete(10)
    plateaus = {}
    for g in (1.0, 2.0):
        ens, _, _ = stationary_run(net, n_paths, gain=g, T=1.0, threads=threads)
        plateaus[g] = ens.late_window_average()
    (p1, s1), (p2, s2) = plateaus[1.0], plateaus[2.0]
    diff = abs(p1 - 2 * p2)
    tol = 3.0 * math.hypot(s1, 2 * s2)
    return [CheckResult("7 gain scaling", diff <= tol,
                        f"plateau g=1 {p1:.5f}, g=2 {p2:.5f}, ratio {p1 / p2:.4f}; |p1-2p2|={diff:.2e} <= {tol:.2e}")]


@_timed
def check_example_38(quick: bool = False) -> list[CheckResult]:
    """Mixed-sign example converges at its computed alpha (+-0.02)."""
    D = example_matrix_38()
    conv = classify_convergent(D)
    x0 = np.random.default_rng(38).normal(size=5)
    traj = integrate_deterministic(CouplingSchedule.constant(D), x0, 200.0)
    rate = fit_decay_rate(traj.times, traj.off_consensus, t_min=40.0)
    ok = conv.convergent and abs(rate - conv.alpha) <= 0.02
    return [CheckResult("8 mixed-sign example", ok, f"convergent={conv.convergent}, alpha={conv.alpha:.5f}, fitted {rate:.5f}")]


def switching_pair(n: int = 8):
    return -cycle_power(n, 2).laplacian(), -star(n).laplacian()


def average_only_pair(n: int = 5):
    """Dissipative complete-graph coupling and an expanding ring with conductance -0.5."""
    return -complete(n).laplacian(), 0.5 * cycle_power(n, 2).laplacian()


@_timed
def check_time_varying(quick: bool = False) -> list[CheckResult]:
    """Switching couplings converge at >= min margin - 0.02; average-only dissipative still converges."""
    rmap = default_map(8)
    A, B = switching_pair(8)
    margins = [dissipativity_margin(reduce(M, rmap).D_hat) for M in (A, B)]
    sched = CouplingSchedule.switching([A, B], period=0.5)
    x0 = np.random.default_rng(9).normal(size=8)
    traj = integrate_deterministic(sched, x0, 20.0)
    rate = fit_decay_rate(traj.times, traj.off_consensus)
    uniform = CheckResult("9a switching rate >= min margin - 0.02", rate >= min(margins) - 0.02,
                          f"fitted {rate:.4f}, margins {margins[0]:.4f}/{margins[1]:.4f}")

    C, E = average_only_pair(5)
    sched = CouplingSchedule.switching([C, E], period=0.2)
    rmap5 = default_map(5)
    worst_margin = dissipativity_margin(reduce(E, rmap5).D_hat)
    avg = asymptotic_dissipativity_estimate(sched, 40.0, 1e-3)
    T = 20.0 / abs(avg)
    y0 = np.random.default_rng(10).normal(size=5)
    traj = integrate_deterministic(sched, y0, T)
    ratio = traj.off_consensus[-1] / traj.off_consensus[0]
    ok = avg < 0 and worst_margin < 0 and ratio < 1e-3
    average = CheckResult("9b average-only dissipative converges", ok,
                          f"avg sup {avg:.4f}, worst margin {worst_margin:.4f}, |y(T)|/|y(0)|={ratio:.2e} at T={T:.2f}")
    return [uniform, average]


CHECKS = (
    check_closed_form_spectra,
    check_effective_resistance,
    check_expander_table,
    check_pseudosim,
    check_cycle_machinery,
    check_stationary_law,
    check_gain_scaling,
    check_example_38,
    check_time_varying,
)


def run_all(quick: bool = False, threads: int | None = None, echo=print) -> list[CheckResult]:
    results = []
    for check in CHECKS:
        kwargs = {"quick": quick}
        if check in (check_stationary_law, check_gain_scaling):
            kwargs["threads"] = threads
        for r in check(**kwargs):
            if echo is not None:
                echo(r.line())
            results.append(r)
    return results

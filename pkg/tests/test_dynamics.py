import math

import numpy as np
import pytest
from scipy.linalg import expm, solve_continuous_lyapunov

from consensus_lab import (
    CouplingSchedule,
    IntegrationBlowUp,
    NotConvergent,
    NotNormal,
    NotZeroRowSum,
    OrientedNetwork,
    PreconditionNotDissipative,
    alpha_rho,
    classify_convergent,
    default_map,
    fit_decay_rate,
    integrate_deterministic,
    integrate_moment_odes,
    integrate_sde,
    reduce,
    stationary_prediction,
    uniform_bound,
    uniform_bound_check,
)
from consensus_lab.dynamics import MAX_DEFAULT_STEPS, off_consensus_norm
from consensus_lab.generators import complete, cycle_power, example_matrix_38, path, star
from consensus_lab.rng import BLOCK_PATHS, CounterStream
from consensus_lab.verify import moment_agreement


def K(n):
    return complete(n).coupling_matrix()


class TestSchedule:
    def test_rejects_nonzero_row_sum(self):
        with pytest.raises(NotZeroRowSum):
            CouplingSchedule.constant(np.eye(3))
        with pytest.raises(NotZeroRowSum):
            CouplingSchedule.switching([K(3), np.eye(3)], period=1.0)

    def test_callable_checked_on_every_call(self):
        sched = CouplingSchedule(3, lambda t: K(3) if t < 1 else np.eye(3))
        sched.coupling(0.5)
        with pytest.raises(NotZeroRowSum):
            sched.coupling(1.5)

    def test_negative_gain_or_sigma(self):
        with pytest.raises(ValueError):
            CouplingSchedule.constant(K(3), gain=-1.0)
        with pytest.raises(ValueError):
            CouplingSchedule.constant(K(3), sigma=-0.1)

    def test_gain_scales_coupling(self):
        np.testing.assert_array_equal(CouplingSchedule.constant(K(3), gain=2.5).coupling(0.0), 2.5 * K(3))

    def test_switching_is_right_continuous(self):
        A, B = K(3), path(3).coupling_matrix()
        sched = CouplingSchedule.switching([A, B], period=1.0, fractions=[0.25, 0.75])
        assert np.array_equal(sched.coupling(0.0), A)
        assert np.array_equal(sched.coupling(0.2499), A)
        assert np.array_equal(sched.coupling(0.25), B)
        assert np.array_equal(sched.coupling(0.99), B)
        assert np.array_equal(sched.coupling(1.0), A)

    def test_switching_bad_arguments(self):
        with pytest.raises(ValueError):
            CouplingSchedule.switching([K(3)], period=0.0)
        with pytest.raises(ValueError):
            CouplingSchedule.switching([K(3), K(3)], period=1.0, fractions=[1.0])

    def test_default_dt(self):
        sched = CouplingSchedule.constant(K(10))
        assert sched.default_dt(1.0) == pytest.approx(1e-4)
        # long horizons are coarsened to the step budget, short ones are not
        assert sched.default_dt(100.0) == pytest.approx(100.0 / MAX_DEFAULT_STEPS)
        assert sched.default_dt(1e6) == pytest.approx(1e-2)
        assert CouplingSchedule.constant(np.zeros((3, 3))).default_dt(1.0) == pytest.approx(1e-3)


class TestDeterministic:
    def test_consensus_is_fixed(self):
        x0 = np.full(5, 2.5)
        for sched in (CouplingSchedule.constant(example_matrix_38()),
                      CouplingSchedule.switching([K(5), path(5).coupling_matrix()], 0.3)):
            traj = integrate_deterministic(sched, x0, 2.0)
            np.testing.assert_allclose(traj.states, 2.5, atol=1e-12)

    def test_k3_decay(self):
        x0 = np.array([1.0, 0.0, 0.0])
        traj = integrate_deterministic(CouplingSchedule.constant(K(3)), x0, 3.0)
        expected = off_consensus_norm(x0) * np.exp(-3 * traj.times)
        np.testing.assert_allclose(traj.off_consensus, expected, rtol=1e-8, atol=1e-14)

    def test_example_38_rate(self):
        D = example_matrix_38()
        alpha = classify_convergent(D).alpha
        traj = integrate_deterministic(CouplingSchedule.constant(D), np.arange(5.0), 200.0)
        assert fit_decay_rate(traj.times, traj.off_consensus, t_min=40.0) >= alpha - 0.01

    def test_mean_preserved_for_symmetric_switching(self):
        sched = CouplingSchedule.switching([cycle_power(8, 2).coupling_matrix(), star(8).coupling_matrix()], 0.37)
        x0 = np.random.default_rng(0).normal(size=8)
        traj = integrate_deterministic(sched, x0, 5.0)
        drift = np.abs(traj.states.mean(axis=1) - x0.mean())
        assert drift.max() <= 1e-9 * 5.0

    def test_reduction_commutes_with_flow(self):
        D = example_matrix_38()
        rmap = default_map(5)
        x0 = np.random.default_rng(1).normal(size=5)
        traj = integrate_deterministic(CouplingSchedule.constant(D), x0, 10.0)
        D_hat = reduce(D, rmap).D_hat
        for t, x in zip(traj.times[::500], traj.states[::500]):
            assert np.linalg.norm(rmap.S @ x - expm(t * D_hat) @ rmap.S @ x0) <= 1e-7

    def test_reduction_commutes_time_varying(self):
        A, B = K(6), path(6).coupling_matrix()
        sched = CouplingSchedule.switching([A, B], 0.5)
        x0 = np.random.default_rng(2).normal(size=6)
        traj = integrate_deterministic(sched, x0, 3.0)
        mom = integrate_moment_odes(sched, default_map(6).S @ x0, 3.0)
        S = default_map(6).S
        final = S @ traj.states[-1]
        assert np.linalg.norm(final - mom.mean[-1]) <= 1e-7

    def test_blowup_reported(self):
        sched = CouplingSchedule.constant(-K(5))
        with pytest.raises(IntegrationBlowUp) as info:
            integrate_deterministic(sched, np.arange(5.0), 20.0)
        assert info.value.norm > 1e12

    def test_step_divides_horizon(self):
        traj = integrate_deterministic(CouplingSchedule.constant(K(3)), np.arange(3.0), 1.0, dt=0.3)
        assert traj.times[-1] == pytest.approx(1.0)
        np.testing.assert_allclose(np.diff(traj.times), 0.25)

    def test_invalid_horizon(self):
        with pytest.raises(ValueError):
            integrate_deterministic(CouplingSchedule.constant(K(3)), np.zeros(3), 0.0)
        with pytest.raises(ValueError):
            integrate_deterministic(CouplingSchedule.constant(K(3)), np.zeros(3), 1.0, dt=-1.0)


class TestSDE:
    def test_zero_noise_tracks_deterministic(self):
        sched = CouplingSchedule.constant(K(3))
        x0 = np.array([1.0, 0.0, -2.0])
        ens = integrate_sde(sched, x0, 1.0, n_paths=3, seed=0)
        exact = integrate_deterministic(sched, x0, 1.0)
        np.testing.assert_allclose(ens.paths[-1, 0], exact.states[-1], atol=1e-3)
        assert np.all(ens.paths[:, 0] == ens.paths[:, 2])

    def test_pure_diffusion(self):
        n, sigma, T = 4, 0.3, 1.0
        sched = CouplingSchedule.constant(np.zeros((n, n)), sigma=sigma)
        ens = integrate_sde(sched, np.zeros(n), T, n_paths=4000, seed=5)
        sq = np.sum(ens.paths[-1] ** 2, axis=1)
        se = sq.std(ddof=1) / math.sqrt(sq.size)
        assert abs(sq.mean() - n * sigma**2 * T) <= 3 * se

    def test_k10_plateau(self):
        sched = CouplingSchedule.constant(K(10), sigma=0.1)
        ens = integrate_sde(sched, np.zeros(10), 1.0, n_paths=2000, seed=11)
        plateau, _ = ens.late_window_average()
        pred = stationary_prediction(K(10), 0.1).limit_second_moment
        assert abs(plateau - pred) <= 0.05 * pred

    def test_reproducible_and_thread_invariant(self):
        sched = CouplingSchedule.constant(path(5).coupling_matrix(), sigma=0.2)
        x0 = np.arange(5.0)
        a = integrate_sde(sched, x0, 0.5, n_paths=2 * BLOCK_PATHS + 17, seed=9, threads=1)
        b = integrate_sde(sched, x0, 0.5, n_paths=2 * BLOCK_PATHS + 17, seed=9, threads=3)
        assert np.array_equal(a.paths, b.paths)
        c = integrate_sde(sched, x0, 0.5, n_paths=2 * BLOCK_PATHS + 17, seed=10)
        assert not np.array_equal(a.paths, c.paths)

    def test_env_thread_fallback(self, monkeypatch):
        sched = CouplingSchedule.constant(path(4).coupling_matrix(), sigma=0.2)
        a = integrate_sde(sched, np.zeros(4), 0.2, n_paths=BLOCK_PATHS + 5, seed=1)
        monkeypatch.setenv("CONSENSUS_LAB_THREADS", "2")
        b = integrate_sde(sched, np.zeros(4), 0.2, n_paths=BLOCK_PATHS + 5, seed=1)
        assert np.array_equal(a.paths, b.paths)

    def test_path_noise_independent_of_ensemble_size(self):
        sched = CouplingSchedule.constant(path(4).coupling_matrix(), sigma=0.2)
        small = integrate_sde(sched, np.zeros(4), 0.3, n_paths=10, seed=4)
        large = integrate_sde(sched, np.zeros(4), 0.3, n_paths=BLOCK_PATHS + 10, seed=4)
        assert np.array_equal(small.paths, large.paths[:, :10])

    def test_loading_matrix(self):
        U = np.diag([1.0, 0.0, 0.0])
        sched = CouplingSchedule.constant(np.zeros((3, 3)), sigma=1.0, U=U)
        ens = integrate_sde(sched, np.zeros(3), 0.1, n_paths=50, seed=0)
        assert np.all(ens.paths[:, :, 1:] == 0)
        assert np.any(ens.paths[-1, :, 0] != 0)

    def test_bad_path_count(self):
        with pytest.raises(ValueError):
            integrate_sde(CouplingSchedule.constant(K(3)), np.zeros(3), 1.0, n_paths=0)

    def test_blowup(self):
        sched = CouplingSchedule.constant(-K(4), sigma=0.1)
        with pytest.raises(IntegrationBlowUp):
            integrate_sde(sched, np.ones(4) + np.arange(4), 10.0, n_paths=5)


class TestMoments:
    def test_noise_free(self):
        D = path(4).coupling_matrix()
        rmap = default_map(4)
        y0 = rmap.S @ np.array([3.0, -1.0, 0.5, 2.0])
        mom = integrate_moment_odes(CouplingSchedule.constant(D), y0, 2.0)
        assert not np.any(mom.cov)
        D_hat = reduce(D, rmap).D_hat
        np.testing.assert_allclose(mom.mean[-1], expm(2.0 * D_hat) @ y0, atol=1e-10)

    def test_k3_stationary_covariance(self):
        mom = integrate_moment_odes(CouplingSchedule.constant(K(3), sigma=1.0), np.zeros(2), 8.0)
        np.testing.assert_allclose(mom.cov[-1], np.eye(2) / 6, atol=1e-6)

    def test_invariants(self):
        sched = CouplingSchedule.switching([K(5), 0.5 * path(5).coupling_matrix()], 0.4, sigma=0.3)
        y0 = default_map(5).S @ np.arange(5.0)
        mom = integrate_moment_odes(sched, y0, 3.0)
        for V in mom.cov:
            np.testing.assert_allclose(V, V.T, atol=1e-12)
            assert np.linalg.eigvalsh(V)[0] >= -1e-9
        expected = np.sum(mom.mean**2, axis=1) + np.trace(mom.cov, axis1=1, axis2=2)
        np.testing.assert_allclose(mom.off_consensus_second_moment, expected, rtol=1e-12)

    @pytest.mark.parametrize("scenario", ["complete", "loaded path", "switching"])
    def test_ensemble_matches_oracle(self, scenario):
        n = 5
        rng = np.random.default_rng(42)
        x0 = rng.normal(size=n)
        if scenario == "complete":
            sched = CouplingSchedule.constant(K(n), sigma=0.2)
        elif scenario == "loaded path":
            U = np.eye(n) + 0.3 * rng.normal(size=(n, n))
            sched = CouplingSchedule.constant(path(n).coupling_matrix(), sigma=0.3, U=U)
        else:
            sched = CouplingSchedule.switching([K(n), star(n).coupling_matrix()], 0.25, sigma=0.2)
        ens = integrate_sde(sched, x0, 1.0, n_paths=3000, seed=17)
        mom = integrate_moment_odes(sched, default_map(n).S @ x0, 1.0)
        np.testing.assert_allclose(ens.times, mom.times)
        ok, z = moment_agreement(ens, mom)
        assert ok, z


class TestStationaryPrediction:
    @pytest.mark.parametrize("n,sigma", [(3, 1.0), (10, 0.1), (25, 0.7)])
    def test_complete(self, n, sigma):
        pred = stationary_prediction(K(n), sigma)
        assert pred.limit_second_moment == pytest.approx(sigma**2 / 2 * (n - 1) / n, rel=1e-12)

    def test_p3(self):
        assert stationary_prediction(path(3).coupling_matrix(), 1.0).limit_second_moment == pytest.approx(2 / 3)

    def test_zero_noise(self):
        assert stationary_prediction(path(6).coupling_matrix(), 0.0).limit_second_moment == 0.0

    def test_matches_lyapunov_solver(self):
        D = cycle_power(9, 4).coupling_matrix()
        sigma = 0.4
        D_hat = reduce(D).D_hat
        V = solve_continuous_lyapunov(D_hat, -(sigma**2) * np.eye(8))
        pred = stationary_prediction(D, sigma)
        np.testing.assert_allclose(pred.limit_cov, V, atol=1e-12)
        assert pred.limit_second_moment == pytest.approx(sigma**2 / 2 * alpha_rho(D)[1])

    def test_gain(self):
        D = path(5).coupling_matrix()
        a = stationary_prediction(D, 0.3).limit_second_moment
        b = stationary_prediction(D, 0.3, gain=4.0).limit_second_moment
        assert a == pytest.approx(4 * b)

    def test_errors(self):
        with pytest.raises(NotNormal):
            stationary_prediction(example_matrix_38(), 0.1)
        with pytest.raises(NotConvergent):
            stationary_prediction(OrientedNetwork(4, ((0, 1), (2, 3))).coupling_matrix(), 0.1)


class TestUniformBound:
    def test_k5_value(self):
        sched = CouplingSchedule.constant(K(5), sigma=0.2)
        assert uniform_bound(sched, 1.0) == pytest.approx(0.2**2 / 2)

    def test_k5_holds_and_gain_shrinks_plateau(self):
        plateaus = []
        for g in (1.0, 10.0):
            sched = CouplingSchedule.constant(K(5), sigma=0.2, gain=g)
            ens = integrate_sde(sched, np.zeros(5), 1.0, n_paths=2000, seed=3)
            assert uniform_bound_check(sched, ens)
            plateaus.append(ens.late_window_average()[0])
        assert plateaus[0] / plateaus[1] == pytest.approx(10.0, rel=0.1)

    def test_zero_noise_trivial(self):
        sched = CouplingSchedule.constant(K(4))
        ens = integrate_sde(sched, np.zeros(4), 0.5, n_paths=4, seed=0)
        assert uniform_bound(sched, 0.5) == 0.0
        assert uniform_bound_check(sched, ens)

    def test_not_dissipative(self):
        sched = CouplingSchedule.switching([K(4), np.zeros((4, 4))], 1.0, sigma=0.1)
        with pytest.raises(PreconditionNotDissipative):
            uniform_bound(sched, 2.0)


class TestRng:
    def test_stream_is_function_of_step(self):
        s = CounterStream(7, 0)
        a = s.normals(3, 4, 2).copy()
        s.normals(9, 4, 2)
        np.testing.assert_array_equal(CounterStream(7, 0).normals(3, 4, 2), a)
        np.testing.assert_array_equal(s.normals(3, 4, 2), a)
        assert not np.array_equal(s.normals(4, 4, 2), a)
        assert not np.array_equal(CounterStream(7, 1).normals(3, 4, 2), a)

    def test_prefix_property(self):
        full = CounterStream(1, 2).normals(5, BLOCK_PATHS, 3)
        part = CounterStream(1, 2).normals(5, 10, 3)
        np.testing.assert_array_equal(full[:10], part)

    def test_normal_moments(self):
        z = np.concatenate([CounterStream(0, 0).normals(k, 256, 4).ravel() for k in range(200)])
        assert abs(z.mean()) < 5 / math.sqrt(z.size)
        assert abs(z.var() - 1) < 5 * math.sqrt(2 / z.size)


def test_fit_decay_rate_recovers_exponent():
    t = np.linspace(0, 10, 200)
    assert fit_decay_rate(t, 3 * np.exp(-0.7 * t)) == pytest.approx(0.7)
    assert fit_decay_rate(t, 3 * np.exp(-0.7 * t), t_min=2, t_max=8) == pytest.approx(0.7)

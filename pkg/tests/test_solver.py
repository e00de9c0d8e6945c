"""MAP update closed form, the iterative solver, and snapshot/resume."""

import numpy as np
import pytest
from scipy import optimize

from diffdenoise.forward import noise_draw
from diffdenoise.lam import LambdaPolicy, refine
from diffdenoise.prior import AnalyticGaussianPrior
from diffdenoise.schedule import linear_beta_schedule, make_tau
from diffdenoise.solver import (
    DenoiseConfig,
    denoise,
    denoise_average,
    denoise_runs,
    map_update,
    resume,
    resume_runs,
)


@pytest.fixture(scope="module")
def sched():
    return linear_beta_schedule(80, 1e-4, 0.08)


@pytest.fixture(scope="module")
def tau(sched):
    return make_tau(80, 20, 2, 20)


def _objective(x, y_prev, mu, lam, sigma_t):
    return np.sum((x - y_prev) ** 2) + lam / sigma_t * np.sum((x - mu) ** 2)


class TestMapUpdate:
    def test_matches_numerical_minimizer(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            y_prev = rng.standard_normal(6)
            mu = rng.standard_normal(6)
            lam = float(rng.uniform(0.01, 5.0))
            sigma_t = float(rng.uniform(0.01, 1.0))
            res = optimize.minimize(
                _objective, np.zeros(6), args=(y_prev, mu, lam, sigma_t),
                method="BFGS", options={"gtol": 1e-12},
            )
            got = map_update(y_prev, mu, lam, sigma_t)
            np.testing.assert_allclose(got, res.x, atol=1e-6)

    def test_lambda_zero_returns_observation(self):
        rng = np.random.default_rng(1)
        y_prev = rng.standard_normal((4, 4))
        mu = rng.standard_normal((4, 4))
        np.testing.assert_array_equal(map_update(y_prev, mu, 0.0, 0.3), y_prev)

    def test_large_lambda_returns_prior_mean(self):
        rng = np.random.default_rng(2)
        y_prev = rng.standard_normal((4, 4))
        mu = rng.standard_normal((4, 4))
        np.testing.assert_allclose(map_update(y_prev, mu, 1e12, 0.3), mu, atol=1e-9)

    def test_output_is_convex_combination(self):
        rng = np.random.default_rng(3)
        y_prev = rng.standard_normal((8, 8))
        mu = rng.standard_normal((8, 8))
        out = map_update(y_prev, mu, 0.7, 0.2)
        lo = np.minimum(y_prev, mu)
        hi = np.maximum(y_prev, mu)
        assert np.all(out >= lo - 1e-12)
        assert np.all(out <= hi + 1e-12)

    def test_per_pixel_lambda_matches_scalar_per_pixel(self):
        rng = np.random.default_rng(4)
        y_prev = rng.standard_normal((3, 3))
        mu = rng.standard_normal((3, 3))
        lam = np.abs(rng.standard_normal((3, 3)))
        out = map_update(y_prev, mu, lam, 0.5)
        for i in range(3):
            for j in range(3):
                single = map_update(y_prev[i:i + 1, j:j + 1], mu[i:i + 1, j:j + 1],
                                    float(lam[i, j]), 0.5)
                assert out[i, j] == pytest.approx(single[0, 0], abs=1e-15)

    def test_map_lambda_broadcasts_over_run_axis(self):
        rng = np.random.default_rng(5)
        y_prev = rng.standard_normal((4, 3, 3))
        mu = rng.standard_normal((4, 3, 3))
        lam = np.abs(rng.standard_normal((3, 3)))
        out = map_update(y_prev, mu, lam, 0.5)
        for r in range(4):
            np.testing.assert_array_equal(out[r], map_update(y_prev[r], mu[r], lam, 0.5))

    def test_validation(self):
        with pytest.raises(ValueError):
            map_update(np.zeros(2), np.zeros(2), 0.1, 0.0)
        with pytest.raises(ValueError):
            map_update(np.zeros(2), np.zeros(2), -0.1, 0.3)
        with pytest.raises(ValueError):
            map_update(np.zeros((2, 2)), np.zeros((2, 3)), 0.1, 0.3)


class TestDenoise:
    def _setup(self, sched, seed=0):
        rng = np.random.default_rng(seed)
        m = np.full((8, 8), 0.5)
        x0 = m + 0.2 * rng.standard_normal((8, 8))
        y0 = x0 + 0.1 * rng.standard_normal((8, 8))
        prior = AnalyticGaussianPrior(sched, m, 0.2)
        return x0, y0, prior

    def test_bitwise_deterministic(self, sched, tau):
        x0, y0, prior = self._setup(sched)
        cfg = DenoiseConfig(tau=tau, lambda_policy=LambdaPolicy(lambda0=0.2), seed=3)
        a, _ = denoise(y0, prior, sched, cfg)
        b, _ = denoise(y0, prior, sched, cfg)
        np.testing.assert_array_equal(a, b)

    def test_reduces_error_vs_input(self, sched, tau):
        x0, y0, prior = self._setup(sched)
        cfg = DenoiseConfig(tau=tau, lambda_policy=LambdaPolicy(lambda0=0.2),
                            averaging=8, seed=0)
        out = denoise_average(y0, prior, sched, cfg)
        assert np.mean((out - x0) ** 2) < np.mean((y0 - x0) ** 2)

    def test_denoise_equals_first_run(self, sched, tau):
        _, y0, prior = self._setup(sched, 1)
        cfg = DenoiseConfig(tau=tau, lambda_policy=LambdaPolicy(lambda0=0.2),
                            averaging=4, seed=5)
        outs, _ = denoise_runs(y0, prior, sched, cfg)
        single, _ = denoise(y0, prior, sched, cfg)
        np.testing.assert_array_equal(single, outs[0])
        assert len(outs) == 4
        assert not np.array_equal(outs[0], outs[1])

    def test_average_is_jensen_bounded(self, sched, tau):
        x0, y0, prior = self._setup(sched, 2)
        cfg = DenoiseConfig(tau=tau, lambda_policy=LambdaPolicy(lambda0=0.2),
                            averaging=6, seed=1)
        outs, _ = denoise_runs(y0, prior, sched, cfg)
        avg_mse = np.mean((np.mean(outs, axis=0) - x0) ** 2)
        per_run = [np.mean((o - x0) ** 2) for o in outs]
        assert avg_mse <= np.mean(per_run) + 1e-12

    def test_tau_must_end_at_schedule_top(self, sched):
        short = make_tau(40, 10, 2, 10)
        _, y0, prior = self._setup(sched, 3)
        cfg = DenoiseConfig(tau=short, lambda_policy=LambdaPolicy(lambda0=0.2))
        with pytest.raises(ValueError):
            denoise(y0, prior, sched, cfg)

    def test_config_validation(self, tau):
        pol = LambdaPolicy(lambda0=0.2)
        with pytest.raises(ValueError):
            DenoiseConfig(tau=tau, lambda_policy=pol, averaging=0)
        with pytest.raises(ValueError):
            DenoiseConfig(tau=tau, lambda_policy=pol, rollback_step=-1)
        with pytest.raises(ValueError):
            DenoiseConfig(tau=tau, lambda_policy=pol, rollback_step=80)
        with pytest.raises(ValueError):
            DenoiseConfig(tau=tau, lambda_policy=pol, rollback_step=4)  # not in tau


class TestSnapshotsAndResume:
    def _run(self, sched, tau, rollback=5, averaging=3, lambda0=0.2, seed=0):
        rng = np.random.default_rng(9)
        m = np.full((8, 8), 0.5)
        y0 = m + 0.25 * rng.standard_normal((8, 8))
        prior = AnalyticGaussianPrior(sched, m, 0.2)
        cfg = DenoiseConfig(tau=tau, lambda_policy=LambdaPolicy(lambda0=lambda0),
                            averaging=averaging, rollback_step=rollback, seed=seed)
        outs, snaps = denoise_runs(y0, prior, sched, cfg)
        return y0, prior, cfg, outs, snaps

    def test_one_snapshot_per_run_at_rollback_step(self, sched, tau):
        _, _, cfg, _, snaps = self._run(sched, tau)
        assert len(snaps) == 3
        assert all(sn.timestep == 5 for sn in snaps)
        assert sorted(sn.seed for sn in snaps) == [0, 1, 2]

    def test_resume_unchanged_policy_reproduces_tail(self, sched, tau):
        y0, prior, cfg, outs, snaps = self._run(sched, tau)
        resumed = resume_runs(snaps, prior, sched, cfg)
        for orig, re in zip(outs, resumed):
            np.testing.assert_array_equal(orig, re)

    def test_single_resume_matches_batch(self, sched, tau):
        _, prior, cfg, outs, snaps = self._run(sched, tau)
        np.testing.assert_array_equal(resume(snaps[0], prior, sched, cfg), outs[0])

    def test_refined_policy_changes_result(self, sched, tau):
        y0, prior, cfg, outs, snaps = self._run(sched, tau)
        pol = refine(LambdaPolicy(variant="adaptive_scalar", a=3.0, b=0.1),
                     y0, np.mean(outs, axis=0))
        from dataclasses import replace
        refined_cfg = replace(cfg, lambda_policy=pol)
        resumed = resume_runs(snaps, prior, sched, refined_cfg)
        assert not np.array_equal(resumed[0], outs[0])

    def test_resume_cheaper_than_restart_is_consistent(self, sched, tau):
        # resuming with a constant-refined policy equals a full run with
        # that policy only over the replayed tail; verify against a full
        # restart that shares the trajectory down to the snapshot
        y0, prior, cfg, _, snaps = self._run(sched, tau, lambda0=0.2)
        from dataclasses import replace
        same = replace(cfg, lambda_policy=LambdaPolicy(lambda0=0.2))
        a = resume_runs(snaps, prior, sched, same)
        b = resume_runs(snaps, prior, sched, same)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_resume_rejects_mixed_timesteps(self, sched, tau):
        _, prior, cfg, _, snaps = self._run(sched, tau)
        bad = list(snaps)
        from dataclasses import replace as dreplace
        bad[1] = dreplace(bad[1], timestep=9)
        with pytest.raises(ValueError):
            resume_runs(bad, prior, sched, cfg)
        with pytest.raises(ValueError):
            resume_runs([], prior, sched, cfg)

    def test_no_snapshots_without_rollback(self, sched, tau):
        _, _, _, _, snaps = self._run(sched, tau, rollback=0)
        assert snaps == []

"""Schedule tables checked against an extended-precision product oracle
and closed-form identities."""

import mpmath
import numpy as np
import pytest

from diffdenoise.schedule import (
    NoiseSchedule,
    TauSchedule,
    linear_beta_schedule,
    make_tau,
)


def alpha_bar_oracle(T, beta1, betaT, t):
    """Cumulative signal fraction at timestep t via a 50-digit product."""
    with mpmath.workdps(50):
        step = (mpmath.mpf(betaT) - mpmath.mpf(beta1)) / (T - 1)
        prod = mpmath.mpf(1)
        for i in range(t):
            prod *= 1 - (mpmath.mpf(beta1) + i * step)
        return float(prod)


class TestLinearSchedule:
    def test_endpoints_inclusive(self):
        s = linear_beta_schedule(100, 1e-4, 2e-2)
        assert s.betas[0] == 1e-4
        assert s.betas[-1] == 2e-2
        assert s.T == 100

    def test_alpha_bar_against_product_oracle(self):
        s = linear_beta_schedule(500, 1e-5, 0.05)
        for t in (1, 2, 77, 250, 500):
            expected = alpha_bar_oracle(500, 1e-5, 0.05, t)
            assert s.alpha_bar(t) == pytest.approx(expected, rel=1e-12)

    def test_full_scale_terminal_alpha_bar(self):
        # frozen from the 50-digit oracle for the (2000, 1e-6, 1e-2) schedule
        s = linear_beta_schedule(2000, 1e-6, 1e-2)
        assert s.alpha_bar(2000) == pytest.approx(4.3859782361332086e-05, rel=1e-10)

    def test_alpha_bar_zero_is_exactly_one(self):
        s = linear_beta_schedule(10, 1e-3, 1e-2)
        assert s.alpha_bar(0) == 1.0

    def test_alpha_bars_strictly_decreasing_in_unit_interval(self):
        s = linear_beta_schedule(300, 1e-5, 0.08)
        assert np.all(np.diff(s.alpha_bars) < 0)
        assert np.all(s.alpha_bars > 0)
        assert np.all(s.alpha_bars <= 1)

    def test_rejects_bad_ranges(self):
        with pytest.raises(ValueError):
            linear_beta_schedule(1, 1e-4, 1e-2)
        with pytest.raises(ValueError):
            linear_beta_schedule(10, 0.0, 1e-2)
        with pytest.raises(ValueError):
            linear_beta_schedule(10, 1e-2, 1e-4)  # decreasing
        with pytest.raises(ValueError):
            linear_beta_schedule(10, 1e-4, 1.0)


class TestNoiseSchedule:
    def test_sigma_one_is_exactly_zero(self):
        s = linear_beta_schedule(50, 1e-4, 0.02)
        assert s.sigma(1) == 0.0

    def test_sigma_matches_closed_form(self):
        s = linear_beta_schedule(50, 1e-4, 0.02)
        for t in (2, 17, 50):
            expected = np.sqrt(
                (1 - s.alpha_bar(t - 1)) / (1 - s.alpha_bar(t)) * s.beta(t)
            )
            assert s.sigma(t) == pytest.approx(expected, rel=1e-15)

    def test_posterior_coefficients_match_gaussian_conditioning(self):
        # the forward posterior combines N(x_t; sqrt(alpha_t) x_{t-1}, beta_t)
        # with N(x_{t-1}; sqrt(abar_{t-1}) x0, 1 - abar_{t-1}) by precision
        # weighting; t = 1 is degenerate (posterior collapses onto x0)
        s = linear_beta_schedule(80, 1e-4, 0.03)
        for t in (2, 5, 40, 80):
            alpha = 1 - s.beta(t)
            abar_prev = s.alpha_bar(t - 1)
            prec = alpha / s.beta(t) + 1 / (1 - abar_prev)
            want_xt = (np.sqrt(alpha) / s.beta(t)) / prec
            want_x0 = (np.sqrt(abar_prev) / (1 - abar_prev)) / prec
            c0, ct, beta_tilde = s.posterior_coefficients(t)
            assert c0 == pytest.approx(want_x0, rel=1e-12)
            assert ct == pytest.approx(want_xt, rel=1e-12)
            assert beta_tilde == pytest.approx(1 / prec, rel=1e-12)
            assert beta_tilde == pytest.approx(s.sigma(t) ** 2, abs=1e-15)
        c0, ct, _ = s.posterior_coefficients(1)
        assert c0 == pytest.approx(1.0, rel=1e-12)
        assert ct == 0.0

    def test_tables_are_read_only(self):
        s = linear_beta_schedule(10, 1e-3, 1e-2)
        with pytest.raises(ValueError):
            s.betas[0] = 0.5
        with pytest.raises(ValueError):
            s.alpha_bars[0] = 0.5

    def test_out_of_range_timesteps(self):
        s = linear_beta_schedule(10, 1e-3, 1e-2)
        for bad in (0, 11):
            with pytest.raises(ValueError):
                s.beta(bad)
        with pytest.raises(ValueError):
            s.alpha_bar(-1)
        with pytest.raises(ValueError):
            s.alpha_bar(11)

    def test_rejects_invalid_betas(self):
        with pytest.raises(ValueError):
            NoiseSchedule(betas=np.array([0.02, 0.01]))  # decreasing
        with pytest.raises(ValueError):
            NoiseSchedule(betas=np.array([0.0, 0.01]))
        with pytest.raises(ValueError):
            NoiseSchedule(betas=np.array([[0.01]]))


class TestTauSchedule:
    def test_full_scale_subsequence_frozen(self):
        tau = make_tau(2000, 501, 20, 500)
        expected = tuple(range(1, 502, 20)) + (1001, 1501, 2000)
        assert tau.taus == expected
        assert len(tau) == 29

    def test_small_subsequence_frozen(self):
        tau = make_tau(100, 50, 10, 25)
        assert tau.taus == (1, 11, 21, 31, 41, 75, 100)

    def test_toy_subsequence_structure(self):
        tau = make_tau(200, 50, 2, 50)
        assert tau.taus[0] == 1
        assert tau.last == 200
        assert len(tau) == 28
        assert {100, 150, 200} <= set(tau.taus)

    def test_always_contains_endpoints(self):
        tau = make_tau(30, 5, 3, 7)
        assert tau.taus[0] == 1
        assert tau.last == 30

    def test_index_of(self):
        tau = make_tau(100, 50, 10, 25)
        assert tau.index_of(21) == 2
        with pytest.raises(ValueError):
            tau.index_of(22)

    def test_validation(self):
        with pytest.raises(ValueError):
            TauSchedule(taus=(2, 10))  # must start at 1
        with pytest.raises(ValueError):
            TauSchedule(taus=(1, 5, 5))  # strictly increasing
        with pytest.raises(ValueError):
            TauSchedule(taus=(1,))
        with pytest.raises(ValueError):
            make_tau(100, 0, 10, 25)
        with pytest.raises(ValueError):
            make_tau(100, 50, 0, 25)

"""Tests for d4pm.schedule."""

import math

import numpy as np
import pytest

from d4pm.errors import ConfigError
from d4pm.schedule import (
    NoiseSchedule,
    inference_level,
    level_bounds,
    make_schedule,
    sample_continuous_level,
    sample_continuous_levels,
)


class TestMakeSchedule:
    def test_random_configs_hold_recurrence_and_monotonicity(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            T = int(rng.integers(1, 1001))
            beta_start = float(rng.uniform(1e-5, 1e-2))
            beta_end = float(rng.uniform(beta_start, 0.2))
            s = make_schedule(T, beta_start, beta_end)
            assert s.beta.shape == s.alpha.shape == s.alpha_bar.shape == (T,)
            np.testing.assert_allclose(s.alpha, 1.0 - s.beta, rtol=1e-12)
            np.testing.assert_allclose(s.alpha_bar[0], s.alpha[0], rtol=1e-12)
            np.testing.assert_allclose(s.alpha_bar[1:], s.alpha_bar[:-1] * s.alpha[1:], rtol=1e-12)
            assert np.all(np.diff(s.alpha_bar) < 0)
            assert np.all((s.alpha_bar > 0) & (s.alpha_bar < 1))
            assert np.all(np.diff(s.beta) >= 0)

    def test_endpoints_follow_linear_interpolation(self, schedule):
        assert schedule.beta[0] == pytest.approx(1e-4)
        assert schedule.beta[-1] == pytest.approx(5e-2)
        np.testing.assert_allclose(np.diff(schedule.beta), (5e-2 - 1e-4) / 49)

    def test_single_step_schedule(self):
        s = make_schedule(1, 0.01, 0.01)
        assert s.alpha_bar[0] == pytest.approx(0.99)
        assert s.alpha_bar_at(0) == 1.0

    def test_tables_are_read_only(self, schedule):
        with pytest.raises(ValueError):
            schedule.beta[0] = 0.5

    @pytest.mark.parametrize(
        "T, beta_start, beta_end",
        [(0, 1e-4, 0.02), (10, 0.0, 0.02), (10, 1e-4, 1.0), (10, 0.05, 0.01), (2.5, 1e-4, 0.02)],
    )
    def test_invalid_parameters_raise(self, T, beta_start, beta_end):
        with pytest.raises(ConfigError):
            make_schedule(T, beta_start, beta_end)

    def test_dict_round_trip_rebuilds_tables(self, schedule):
        again = NoiseSchedule.from_dict(schedule.to_dict())
        assert again.T == schedule.T
        np.testing.assert_array_equal(again.alpha_bar, schedule.alpha_bar)


class TestStepAccessors:
    def test_out_of_range_step_raises(self, schedule):
        with pytest.raises(ConfigError):
            schedule.beta_at(0)
        with pytest.raises(ConfigError):
            schedule.alpha_bar_at(schedule.T + 1)

    def test_sigma_vanishes_at_first_step(self, schedule):
        assert schedule.sigma_at(1) == 0.0

    def test_sigma_matches_posterior_variance(self, schedule):
        t = 20
        abar, abar_prev = schedule.alpha_bar_at(t), schedule.alpha_bar_at(t - 1)
        expected = math.sqrt(schedule.beta_at(t) * (1 - abar_prev) / (1 - abar))
        assert schedule.sigma_at(t) == pytest.approx(expected, rel=1e-14)
        assert schedule.sigma_at(t) < math.sqrt(schedule.beta_at(t))


class TestContinuousLevel:
    def test_first_step_bounds(self, schedule):
        low, high = level_bounds(schedule, 1)
        assert high == 1.0
        assert low == pytest.approx(math.sqrt(1 - 1e-4))

    def test_draws_stay_inside_bounds(self, schedule, rng):
        for t in (1, 2, 25, 50):
            low, high = level_bounds(schedule, t)
            for _ in range(200):
                level = sample_continuous_level(schedule, t, rng)
                assert low <= level.value <= high
                assert level.step == t

    def test_vectorized_draws_match_bounds(self, schedule, rng):
        t = rng.integers(1, schedule.T + 1, size=500)
        levels = sample_continuous_levels(schedule, t, rng)
        low = np.sqrt(schedule.alpha_bar[t - 1])
        high = np.sqrt(np.concatenate(([1.0], schedule.alpha_bar))[t - 1])
        assert np.all((levels >= low) & (levels <= high))

    def test_vectorized_rejects_bad_steps(self, schedule, rng):
        with pytest.raises(ConfigError):
            sample_continuous_levels(schedule, np.array([0, 3]), rng)

    def test_seeded_draws_repeat(self, schedule):
        a = sample_continuous_level(schedule, 10, np.random.default_rng(5))
        b = sample_continuous_level(schedule, 10, np.random.default_rng(5))
        assert a == b

    def test_inference_level_is_lower_bound(self, schedule):
        for t in (1, 17, 50):
            assert inference_level(schedule, t).value == level_bounds(schedule, t)[0]


class TestWorkedValues:
    def test_three_step_schedule(self):
        s = make_schedule(3, 0.1, 0.3)
        np.testing.assert_allclose(s.beta, [0.1, 0.2, 0.3], rtol=1e-12)
        np.testing.assert_allclose(s.alpha, [0.9, 0.8, 0.7], rtol=1e-12)
        np.testing.assert_allclose(s.alpha_bar, [0.9, 0.72, 0.504], rtol=1e-12)

    def test_three_step_level_interval(self):
        s = make_schedule(3, 0.1, 0.3)
        low, high = level_bounds(s, 2)
        assert low == pytest.approx(math.sqrt(0.72))
        assert high == pytest.approx(math.sqrt(0.9))
        assert inference_level(s, 3).value == pytest.approx(0.70993, abs=1e-5)

    def test_inference_level_rejects_step_zero(self, schedule):
        with pytest.raises(ConfigError):
            inference_level(schedule, 0)
        with pytest.raises(ConfigError):
            inference_level(schedule, schedule.T + 1)


class TestStatistics:
    def test_level_draws_center_on_interval_midpoint(self, schedule):
        rng = np.random.default_rng(21)
        t = 30
        low, high = level_bounds(schedule, t)
        draws = np.array([sample_continuous_level(schedule, t, rng).value for _ in range(10_000)])
        assert low <= draws.min() and draws.max() <= high
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - 0.5 * (low + high)) <= 3 * se

    def test_forward_marginal_moments(self, schedule):
        rng = np.random.default_rng(22)
        x0 = np.linspace(-1.5, 1.5, 8)
        draws = 10_000
        for t in (1, 25, 50):
            abar = schedule.alpha_bar_at(t)
            eps = rng.standard_normal((draws, x0.size))
            x_t = math.sqrt(abar) * x0 + math.sqrt(1.0 - abar) * eps
            var = 1.0 - abar
            mean_se = math.sqrt(var / draws)
            var_se = var * math.sqrt(2.0 / (draws - 1))
            assert np.all(np.abs(x_t.mean(axis=0) - math.sqrt(abar) * x0) <= 5 * mean_se)
            assert np.all(np.abs(x_t.var(axis=0, ddof=1) - var) <= 5 * var_se)

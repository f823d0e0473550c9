"""Tests for d4pm.sampler."""

import math

import numpy as np
import pytest
import torch

from d4pm.denoiser import init_params
from d4pm.errors import ConfigError, SamplingError
from d4pm.sampler import (
    SamplerConfig,
    consistency_step,
    joint_sample,
    posterior_coefficients,
    posterior_mean,
    predict_x0,
    predict_x0_legacy,
    seeded_generator,
    single_branch_sample,
)
from d4pm.schedule import make_schedule


def zero_eps(x_t, y, level, z):
    return torch.zeros_like(x_t)


def scaled_eps(x_t, y, level, z):
    return 0.3 * x_t - 0.1 * y


class TestConsistencyStep:
    def test_residual_vanishes_with_unit_scale(self):
        rng = np.random.default_rng(0)
        x0 = torch.as_tensor(rng.standard_normal((1000, 32)))
        x0p = torch.as_tensor(rng.standard_normal((1000, 32)))
        y = torch.as_tensor(rng.standard_normal((1000, 32)))
        for lambda_dc in rng.uniform(0, 1, 20):
            x0_hat, x0p_hat, _ = consistency_step(x0, x0p, y, SamplerConfig(lambda_dc=float(lambda_dc)))
            gap = torch.linalg.vector_norm(y - (x0_hat + x0p_hat), dim=-1)
            assert torch.all(gap <= 1e-6 * torch.linalg.vector_norm(y, dim=-1))

    def test_full_weight_leaves_artifact_untouched(self):
        x0, x0p, y = torch.ones(8), 2 * torch.ones(8), torch.zeros(8)
        x0_hat, x0p_hat, r = consistency_step(x0, x0p, y, SamplerConfig(lambda_dc=1.0))
        torch.testing.assert_close(x0p_hat, x0p)
        torch.testing.assert_close(x0_hat, x0 + r)

    def test_scaled_residual(self):
        x0, x0p, y = torch.zeros(8), torch.ones(8), torch.ones(8)
        _, _, r = consistency_step(x0, x0p, y, SamplerConfig(lambda_snr=2.0))
        torch.testing.assert_close(r, -torch.ones(8))

    @pytest.mark.parametrize("kwargs", [{"lambda_dc": 1.5}, {"lambda_dc": -0.1}, {"lambda_snr": 0.0}, {"x0_formula": "other"}])
    def test_invalid_config(self, kwargs):
        with pytest.raises(ConfigError):
            SamplerConfig(**kwargs)


class TestStepFormulas:
    def test_predict_x0_inverts_forward_process(self, schedule):
        rng = np.random.default_rng(1)
        x0, eps = rng.standard_normal(16), rng.standard_normal(16)
        for t in (1, 10, 50):
            abar = schedule.alpha_bar_at(t)
            x_t = math.sqrt(abar) * x0 + math.sqrt(1 - abar) * eps
            np.testing.assert_allclose(predict_x0(schedule, t, x_t, eps), x0, rtol=1e-10, atol=1e-12)

    def test_first_step_mean_is_x0(self, schedule):
        c0, ct = posterior_coefficients(schedule, 1)
        assert c0 == pytest.approx(1.0)
        assert ct == 0.0

    def test_posterior_mean_of_consistent_pair(self, schedule):
        # A noise-free trajectory x_t = sqrt(abar_t) x0 maps to sqrt(abar_{t-1}) x0.
        x0 = np.linspace(-1, 1, 16)
        t = 30
        mu = posterior_mean(schedule, t, x0, math.sqrt(schedule.alpha_bar_at(t)) * x0)
        np.testing.assert_allclose(mu, math.sqrt(schedule.alpha_bar_at(t - 1)) * x0, rtol=1e-12)

    def test_three_step_posterior_mean(self):
        s = make_schedule(3, 0.1, 0.3)
        mu = posterior_mean(s, 2, np.ones(1), np.ones(1))
        expected = 0.2 * math.sqrt(0.9) / 0.28 + 0.1 * math.sqrt(0.8) / 0.28
        np.testing.assert_allclose(mu, [expected], rtol=1e-12)
        assert mu[0] == pytest.approx(0.99702, abs=1e-5)

    def test_three_step_x0_inversion(self):
        s = make_schedule(3, 0.1, 0.3)
        x0 = predict_x0(s, 3, np.ones(1), np.ones(1))
        np.testing.assert_allclose(x0, [(1 - math.sqrt(0.496)) / math.sqrt(0.504)], rtol=1e-12)
        assert x0[0] == pytest.approx(0.4167, abs=1e-3)

    def test_legacy_differs_from_standard(self, schedule):
        x_t, eps = np.ones(4), np.full(4, 0.5)
        standard = predict_x0(schedule, 20, x_t, eps)
        assert not np.allclose(predict_x0_legacy(schedule, 20, x_t, eps, artifact_branch=False), standard)
        assert not np.allclose(predict_x0_legacy(schedule, 20, x_t, eps, artifact_branch=True), standard)


class TestJointSample:
    def test_shapes_and_squeeze(self, short_schedule):
        y = torch.randn(3, 16, dtype=torch.float64)
        x0, x0p = joint_sample(scaled_eps, scaled_eps, y, 0, short_schedule, SamplerConfig())
        assert x0.shape == x0p.shape == (3, 16)
        x0, x0p = joint_sample(scaled_eps, scaled_eps, y[0], "EOG", short_schedule, SamplerConfig())
        assert x0.shape == (16,)

    def test_seed_determines_output(self, short_schedule):
        y = torch.randn(2, 16, dtype=torch.float64)
        a = joint_sample(scaled_eps, scaled_eps, y, 0, short_schedule, SamplerConfig(seed=4))
        b = joint_sample(scaled_eps, scaled_eps, y, 0, short_schedule, SamplerConfig(seed=4))
        c = joint_sample(scaled_eps, scaled_eps, y, 0, short_schedule, SamplerConfig(seed=5))
        assert torch.equal(a[0], b[0]) and torch.equal(a[1], b[1])
        assert not torch.equal(a[0], c[0])

    def test_noiseless_run_ignores_seed(self, short_schedule):
        y = torch.randn(2, 16, dtype=torch.float64)
        a = joint_sample(scaled_eps, scaled_eps, y, 0, short_schedule, SamplerConfig(seed=1), noiseless=True)
        b = joint_sample(scaled_eps, scaled_eps, y, 0, short_schedule, SamplerConfig(seed=2), noiseless=True)
        assert torch.equal(a[0], b[0])

    def test_output_explains_measurement(self, schedule):
        y = torch.randn(4, 16, dtype=torch.float64)
        x0, x0p = joint_sample(scaled_eps, zero_eps, y, 0, schedule, SamplerConfig(lambda_dc=0.3))
        torch.testing.assert_close(x0 + x0p, y)

    def test_trace_has_one_row_per_step(self, short_schedule):
        trace = []
        joint_sample(scaled_eps, scaled_eps, torch.randn(16, dtype=torch.float64), 0, short_schedule, SamplerConfig(), trace=trace)
        assert [row["step"] for row in trace] == list(range(short_schedule.T, 0, -1))
        assert set(trace[0]) == {"step", "level", "residual_norm", "corrected_residual_norm", "x0_norm", "x0p_norm"}
        # lambda_snr = 1 leaves no residual after correction
        assert all(row["corrected_residual_norm"] < 1e-9 for row in trace)

    def test_stochastic_level_changes_conditioning(self, short_schedule):
        seen = []

        def recording_eps(x_t, y, level, z):
            seen.append(float(level[0]))
            return torch.zeros_like(x_t)

        joint_sample(recording_eps, zero_eps, torch.ones(16, dtype=torch.float64), 0, short_schedule, SamplerConfig(stochastic_level=True))
        expected = [math.sqrt(short_schedule.alpha_bar_at(t)) for t in range(short_schedule.T, 0, -1)]
        assert seen != expected
        assert all(low <= v for v, low in zip(seen, expected))

    def test_independent_eta(self, short_schedule):
        y = torch.zeros(1, 16, dtype=torch.float64)
        shared = joint_sample(zero_eps, zero_eps, y, 0, short_schedule, SamplerConfig(seed=3))
        split = joint_sample(zero_eps, zero_eps, y, 0, short_schedule, SamplerConfig(seed=3, share_eta=False))
        assert not torch.equal(shared[0], split[0])

    def test_non_finite_prediction_raises(self, short_schedule):
        def broken(x_t, y, level, z):
            return torch.full_like(x_t, float("nan"))

        with pytest.raises(SamplingError) as info:
            joint_sample(broken, zero_eps, torch.ones(16, dtype=torch.float64), 0, short_schedule, SamplerConfig())
        assert info.value.step == short_schedule.T

    def test_non_finite_measurement_raises(self, short_schedule):
        y = torch.ones(16, dtype=torch.float64)
        y[2] = float("inf")
        with pytest.raises(ConfigError):
            joint_sample(zero_eps, zero_eps, y, 0, short_schedule, SamplerConfig())

    def test_runs_with_a_network(self, short_schedule, tiny_denoiser_cfg):
        eeg = init_params(tiny_denoiser_cfg, 0).double().eval()
        art = init_params(tiny_denoiser_cfg, 1).double().eval()
        y = torch.randn(2, 16, dtype=torch.float64)
        x0, x0p = joint_sample(eeg, art, y, torch.tensor([0, 2]), short_schedule, SamplerConfig(), rng=seeded_generator(0))
        assert torch.isfinite(x0).all() and torch.isfinite(x0p).all()


class TestSingleBranchSample:
    def test_deterministic_and_traced(self, short_schedule):
        y = torch.randn(2, 16, dtype=torch.float64)
        trace = []
        a = single_branch_sample(scaled_eps, y, 1, short_schedule, SamplerConfig(seed=8), trace=trace)
        b = single_branch_sample(scaled_eps, y, 1, short_schedule, SamplerConfig(seed=8))
        assert torch.equal(a, b)
        assert len(trace) == short_schedule.T
        assert all(row["x0p_norm"] == 0.0 for row in trace)

    def test_noiseless_zero_prediction_stays_at_origin(self, short_schedule):
        # eps_hat = 0 gives x0 = x_t / sqrt(abar_t), so x_T = 0 is a fixed point.
        out = single_branch_sample(zero_eps, torch.ones(16, dtype=torch.float64), 0, short_schedule, SamplerConfig(), noiseless=True)
        torch.testing.assert_close(out, torch.zeros(16, dtype=torch.float64))

"""Tests for d4pm.metrics."""

import json
import math

import numpy as np
import pandas as pd
import pytest

from d4pm.errors import ConfigError
from d4pm.metrics import (
    REPORT_COLUMNS,
    SNR_CAP_DB,
    MetricsReport,
    ablation_table,
    aggregate_by_snr,
    build_report,
    cc,
    cc_p_value,
    load_report,
    periodogram,
    rrmse_s,
    rrmse_t,
    snr_out,
)


@pytest.fixture
def x(rng):
    return rng.standard_normal(64)


class TestTimeAndSpectralError:
    def test_identities(self, x):
        assert rrmse_t(x, x) == 0.0
        assert rrmse_t(2 * x, x) == pytest.approx(1.0)
        assert rrmse_t(np.zeros_like(x), x) == pytest.approx(1.0)
        assert rrmse_s(x, x) == 0.0

    def test_spectral_error_ignores_circular_shift(self, x):
        assert rrmse_s(np.roll(x, 7), x) == pytest.approx(0.0, abs=1e-12)

    def test_periodogram_matches_direct_dft(self, rng):
        n = 32
        k = np.arange(n)
        basis = np.exp(-2j * np.pi * np.outer(k, k) / n)
        white = rng.standard_normal(n)
        band = np.sin(2 * np.pi * 3 * k / n) + 0.5 * np.cos(2 * np.pi * 5 * k / n)
        for signal in (white, band):
            direct = np.abs(basis @ signal) ** 2 / n
            np.testing.assert_allclose(periodogram(signal), direct, rtol=1e-9, atol=1e-9)
        p_white, p_band = np.abs(basis @ white) ** 2 / n, np.abs(basis @ band) ** 2 / n
        assert rrmse_s(white, band) == pytest.approx(np.linalg.norm(p_white - p_band) / np.linalg.norm(p_band), abs=1e-9)

    def test_error_shrinks_towards_reference(self, x, rng):
        start = rng.standard_normal(64)
        errors = [rrmse_t(a * start + (1 - a) * x, x) for a in np.linspace(1, 0, 11)]
        assert all(b < a for a, b in zip(errors, errors[1:]))

    def test_invalid_inputs(self, x):
        with pytest.raises(ConfigError):
            rrmse_t(x, np.zeros_like(x))
        with pytest.raises(ConfigError):
            rrmse_s(x[:10], x)
        with pytest.raises(ConfigError):
            rrmse_t(np.full_like(x, np.nan), x)


class TestCorrelation:
    def test_identities(self, x):
        assert cc(x, x) == pytest.approx(1.0)
        assert cc(-x, x) == pytest.approx(-1.0)
        assert cc_p_value(x, x) < 1e-12

    def test_invariant_under_positive_affine_maps(self, x, rng):
        other = x + rng.standard_normal(64)
        assert cc(3 * other + 2, x) == pytest.approx(cc(other, x), rel=1e-12)
        assert cc(other, 0.5 * x - 4) == pytest.approx(cc(other, x), rel=1e-12)

    def test_p_value_matches_permutation_test(self):
        rng = np.random.default_rng(42)
        a = rng.standard_normal(20)
        b = 0.4 * a + rng.standard_normal(20)
        r = cc(a, b)
        shuffled = np.array([np.corrcoef(rng.permutation(a), b)[0, 1] for _ in range(10_000)])
        permutation_p = float(np.mean(np.abs(shuffled) >= abs(r)))
        assert cc_p_value(a, b) == pytest.approx(permutation_p, abs=0.02)
        assert 0.0 <= cc_p_value(a, b) <= 1.0

    def test_constant_or_short_input_raises(self, x):
        with pytest.raises(ConfigError):
            cc(np.ones_like(x), x)
        with pytest.raises(ConfigError):
            cc_p_value(x[:2], x[:2])


class TestOutputSnr:
    def test_twenty_db_case(self):
        x = np.array([10.0, 0.0, 0.0, 0.0])
        x_hat = np.array([10.0, 1.0, 0.0, 0.0])
        assert snr_out(x_hat, x) == pytest.approx(20.0)

    def test_exact_reconstruction_is_infinite(self, x):
        assert snr_out(x, x) == math.inf

    def test_decreases_with_noise(self, x, rng):
        noise = rng.standard_normal(64)
        values = [snr_out(x + scale * noise, x) for scale in (0.01, 0.1, 0.5, 1.0, 2.0)]
        assert all(b < a for a, b in zip(values, values[1:]))


class TestReports:
    def test_rows_columns_and_aggregates(self, tiny_split):
        examples = tiny_split.train
        estimates = [e.clean.samples + 0.1 * e.artifact.samples for e in examples]
        report = build_report(estimates, examples)
        assert len(report) == len(examples)
        assert tuple(report.rows.columns) == REPORT_COLUMNS
        summary = report.aggregate()
        for metric in ("rrmse_t", "rrmse_s", "cc", "snr_out"):
            assert summary["overall"][metric]["mean"] == pytest.approx(report.rows[metric].mean(), abs=1e-9)
        for label, group in summary["by_class"].items():
            rows = report.rows[report.rows["class"] == label]
            assert group["n_segments"] == len(rows)
            assert group["cc"]["mean"] == pytest.approx(rows["cc"].mean(), abs=1e-9)

    def test_clean_estimates_are_capped_and_perfect(self, tiny_split):
        examples = tiny_split.test
        report = build_report([e.clean.samples for e in examples], examples)
        np.testing.assert_allclose(report.rows["cc"], 1.0, atol=1e-12)
        assert (report.rows["snr_out"] == SNR_CAP_DB).all()

    def test_mismatched_lengths_raise(self, tiny_split):
        with pytest.raises(ConfigError):
            build_report([], tiny_split.test)

    def test_save_and_reload(self, tmp_path, tiny_split):
        examples = tiny_split.train
        report = build_report([e.mixture.samples * 0.9 for e in examples], examples)
        baseline = build_report([e.mixture.samples for e in examples], examples)
        json_path = report.save(tmp_path, baseline=baseline)
        summary = json.loads(json_path.read_text())
        assert set(summary) == {"overall", "by_class", "noisy_input"}
        assert (tmp_path / "report_by_snr.csv").is_file()
        again = load_report(tmp_path / "report.csv")
        pd.testing.assert_frame_equal(again.rows, report.rows)

    def test_report_requires_all_columns(self):
        with pytest.raises(ConfigError):
            MetricsReport(pd.DataFrame({"segment": [0]}))

    def test_snr_bins_cover_every_row(self, tiny_split):
        examples = tiny_split.train
        report = build_report([e.mixture.samples for e in examples], examples)
        table = aggregate_by_snr(report)
        assert table["count"].sum() == len(examples)
        assert list(table.columns[:3]) == ["snr_low", "snr_high", "count"]
        assert (table["snr_low"] >= -5.0).all() and (table["snr_high"] <= 5.0).all()
        with pytest.raises(ConfigError):
            aggregate_by_snr(report, edges=[1.0, 0.0])

    def test_ablation_table_shape(self, tiny_split):
        examples = tiny_split.train
        reports = {
            variant: build_report([e.clean.samples + scale * e.artifact.samples for e in examples], examples)
            for variant, scale in (("base", 0.5), ("base+artifacts", 0.3), ("full", 0.1))
        }
        table = ablation_table(reports)
        assert table.shape == (16, 3)
        assert list(table.columns) == ["base", "base+artifacts", "full"]
        assert not table.isna().any().any()
        assert table.loc[("Avg", "cc"), "full"] > table.loc[("Avg", "cc"), "base"]

"""
metrics.py - signal-quality metrics for denoised segments and the reports built from them.

Per-segment metrics of an estimate x_hat against the clean reference x:
    rrmse_t     ||x_hat - x|| / ||x||
    rrmse_s     the same ratio on periodograms |FFT|^2 / N
    cc          Pearson correlation, with a two-sided Student-t p-value
    snr_out     10 log10(||x||^2 / ||x_hat - x||^2) in dB

Report CSV columns (fixed order):
    segment, class, input_snr_db, rrmse_t, rrmse_s, cc, cc_p_value, snr_out
"""

#####################################
# Import Modules
#####################################

# Import packages from Python Standard Library
import json
import math
import pathlib
from dataclasses import dataclass
from typing import Optional, Sequence

# Import external packages
import numpy as np
import pandas as pd
from scipy import stats
from scipy.stats import pearsonr

# Import functions from local modules
from d4pm.errors import ConfigError
from d4pm.signals import ARTIFACT_CLASSES, MixedExample
from utils.utils_logger import logger

#####################################
# Default Configurations
#####################################

SNR_CAP_DB = 120.0
METRIC_NAMES = ("rrmse_t", "rrmse_s", "cc", "snr_out")
REPORT_COLUMNS = ("segment", "class", "input_snr_db", "rrmse_t", "rrmse_s", "cc", "cc_p_value", "snr_out")
DEFAULT_SNR_EDGES_DB = tuple(float(v) for v in range(-5, 6))

#####################################
# Metric Functions
#####################################


def _pair(x_hat, x) -> tuple[np.ndarray, np.ndarray]:
    x_hat = np.asarray(x_hat, dtype=np.float64).ravel()
    x = np.asarray(x, dtype=np.float64).ravel()
    if x_hat.shape != x.shape:
        raise ConfigError(f"estimate has {x_hat.size} samples, reference has {x.size}")
    if not (np.all(np.isfinite(x_hat)) and np.all(np.isfinite(x))):
        raise ConfigError("metric inputs contain non-finite values")
    return x_hat, x


def _relative_error(estimate: np.ndarray, reference: np.ndarray, what: str) -> float:
    norm = float(np.linalg.norm(reference))
    if norm == 0.0:
        raise ConfigError(f"zero-energy reference for {what}")
    return float(np.linalg.norm(estimate - reference)) / norm


def periodogram(x) -> np.ndarray:
    """|FFT(x)|^2 / N over all N bins."""
    x = np.asarray(x, dtype=np.float64)
    return np.abs(np.fft.fft(x)) ** 2 / x.size


def rrmse_t(x_hat, x) -> float:
    """Relative RMSE in the time domain."""
    x_hat, x = _pair(x_hat, x)
    return _relative_error(x_hat, x, "rrmse_t")


def rrmse_s(x_hat, x) -> float:
    """Relative RMSE between periodograms."""
    x_hat, x = _pair(x_hat, x)
    return _relative_error(periodogram(x_hat), periodogram(x), "rrmse_s")


def _check_correlation_inputs(x_hat: np.ndarray, x: np.ndarray) -> None:
    if x.size < 3:
        raise ConfigError(f"correlation needs >= 3 samples, got {x.size}")
    if np.ptp(x_hat) == 0.0 or np.ptp(x) == 0.0:
        raise ConfigError("correlation is undefined for constant input")


def cc(x_hat, x) -> float:
    """Pearson correlation coefficient, clipped to [-1, 1]."""
    x_hat, x = _pair(x_hat, x)
    _check_correlation_inputs(x_hat, x)
    r = float(pearsonr(x_hat, x)[0])
    return min(1.0, max(-1.0, r))


def cc_p_value(x_hat, x) -> float:
    """
    Two-sided p-value of the correlation.

    Uses t = r sqrt((n - 2) / (1 - r^2)) with n - 2 degrees of freedom;
    |r| = 1 gives p = 0.
    """
    x_hat, x = _pair(x_hat, x)
    r = cc(x_hat, x)
    dof = x.size - 2
    if abs(r) >= 1.0:
        return 0.0
    t_stat = r * math.sqrt(dof / (1.0 - r * r))
    return float(min(1.0, 2.0 * stats.t.sf(abs(t_stat), dof)))


def snr_out(x_hat, x) -> float:
    """Output SNR in dB; an exact reconstruction returns +inf."""
    x_hat, x = _pair(x_hat, x)
    signal = float(np.dot(x, x))
    error = float(np.dot(x_hat - x, x_hat - x))
    if signal == 0.0:
        raise ConfigError("zero-energy reference for snr_out")
    if error == 0.0:
        return math.inf
    return 10.0 * math.log10(signal / error)


def segment_metrics(x_hat, x) -> dict:
    """All per-segment metrics of one estimate."""
    return {
        "rrmse_t": rrmse_t(x_hat, x),
        "rrmse_s": rrmse_s(x_hat, x),
        "cc": cc(x_hat, x),
        "cc_p_value": cc_p_value(x_hat, x),
        "snr_out": snr_out(x_hat, x),
    }


#####################################
# Reports
#####################################


def _summary(frame: pd.DataFrame) -> dict:
    # Population std (ddof=0) keeps single-segment groups finite.
    return {
        "n_segments": int(len(frame)),
        **{
            metric: {"mean": float(frame[metric].mean()), "std": float(frame[metric].std(ddof=0))}
            for metric in METRIC_NAMES + ("cc_p_value",)
        },
    }


@dataclass
class MetricsReport:
    """Per-segment rows plus mean/std aggregates per artifact class and overall."""

    rows: pd.DataFrame

    def __post_init__(self):
        missing = [c for c in REPORT_COLUMNS if c not in self.rows.columns]
        if missing:
            raise ConfigError(f"report is missing columns {missing}")
        self.rows = self.rows.loc[:, list(REPORT_COLUMNS)].reset_index(drop=True)

    def __len__(self) -> int:
        return len(self.rows)

    def aggregate(self) -> dict:
        by_class = {
            label.value: _summary(self.rows[self.rows["class"] == label.value])
            for label in ARTIFACT_CLASSES
            if (self.rows["class"] == label.value).any()
        }
        return {"overall": _summary(self.rows), "by_class": by_class}

    def save(self, directory: "str | pathlib.Path", baseline: "Optional[MetricsReport]" = None) -> pathlib.Path:
        """Write report.csv, report.json and report_by_snr.csv; returns the JSON path."""
        directory = pathlib.Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.rows.to_csv(directory / "report.csv", index=False)
        aggregate_by_snr(self).to_csv(directory / "report_by_snr.csv", index=False)
        summary = self.aggregate()
        if baseline is not None:
            summary["noisy_input"] = baseline.aggregate()
        json_path = directory / "report.json"
        json_path.write_text(json.dumps(summary, indent=2) + "\n")
        logger.info(f"Wrote metrics report for {len(self)} segments to {directory}")
        return json_path


def build_report(estimates: Sequence, examples: Sequence[MixedExample]) -> MetricsReport:
    """
    Score estimates against the clean signals of their examples.

    snr_out is capped at SNR_CAP_DB so exact reconstructions stay finite in
    files and aggregates.
    """
    if len(estimates) != len(examples):
        raise ConfigError(f"{len(estimates)} estimates for {len(examples)} examples")
    records = []
    capped = 0
    for index, (estimate, example) in enumerate(zip(estimates, examples)):
        values = segment_metrics(estimate, example.clean.samples)
        if values["snr_out"] > SNR_CAP_DB:
            values["snr_out"] = SNR_CAP_DB
            capped += 1
        records.append(
            {
                "segment": index,
                "class": example.class_label.value,
                "input_snr_db": example.target_snr_db,
                **values,
            }
        )
    if capped:
        logger.warning(f"snr_out capped at {SNR_CAP_DB} dB for {capped} exact reconstructions")
    return MetricsReport(pd.DataFrame.from_records(records, columns=list(REPORT_COLUMNS)))


def load_report(path: "str | pathlib.Path") -> MetricsReport:
    """Read a report.csv written by MetricsReport.save."""
    return MetricsReport(pd.read_csv(path, float_precision="round_trip"))


def aggregate_by_snr(report: MetricsReport, edges: Sequence[float] = DEFAULT_SNR_EDGES_DB) -> pd.DataFrame:
    """Mean metrics per input-SNR bin; empty bins are dropped."""
    edges = [float(e) for e in edges]
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise ConfigError(f"SNR bin edges must be increasing, got {edges}")
    rows = report.rows.copy()
    rows["bin"] = pd.cut(rows["input_snr_db"], bins=edges, include_lowest=True)
    grouped = rows.groupby("bin", observed=True)
    table = grouped[list(METRIC_NAMES)].mean()
    table.insert(0, "count", grouped.size())
    table.insert(0, "snr_high", [interval.right for interval in table.index])
    table.insert(0, "snr_low", [edges[0] if interval.left < edges[0] else interval.left for interval in table.index])
    return table.reset_index(drop=True)


def ablation_table(reports: "dict[str, MetricsReport]") -> pd.DataFrame:
    """
    Variant comparison: rows (artifact, metric) for EOG, EMG, ECG and Avg, one column per variant.

    Avg is the mean over all test segments.
    """
    index = pd.MultiIndex.from_product(
        [[c.value for c in ARTIFACT_CLASSES] + ["Avg"], list(METRIC_NAMES)], names=["artifact", "metric"]
    )
    table = pd.DataFrame(index=index, columns=list(reports), dtype=float)
    for variant, report in reports.items():
        summary = report.aggregate()
        for label in ARTIFACT_CLASSES:
            group = summary["by_class"].get(label.value)
            for metric in METRIC_NAMES:
                table.loc[(label.value, metric), variant] = group[metric]["mean"] if group else math.nan
        for metric in METRIC_NAMES:
            table.loc[("Avg", metric), variant] = summary["overall"][metric]["mean"]
    return table

"""
cli.py

Command-line entry point for the whole pipeline.

    python3 -m d4pm.cli synth-data   --out data
    python3 -m d4pm.cli train        --dataset data --out data
    python3 -m d4pm.cli denoise      --dataset data --out data --variant full
    python3 -m d4pm.cli evaluate     --dataset data --out data --variant full
    python3 -m d4pm.cli ablate       --dataset data --out data
    python3 -m d4pm.cli oracle-check --out data

Settings resolve as flag > --config file > D4PM_* environment > default.
Exit codes: 0 success, 1 failed check or diverged run, 2 usage/config error, 3 I/O error.
"""

#####################################
# Import Modules
#####################################

# Import packages from Python Standard Library
import argparse
import json
import pathlib
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

# Import external packages
import numpy as np
import pandas as pd
import torch

# Import functions from local modules
from d4pm.denoiser import DenoiserConfig, DualPathDenoiser
from d4pm.errors import EXIT_IO, EXIT_OK, CheckFailedError, ConfigError, D4PMError, OutputPathError
from d4pm.metrics import MetricsReport, ablation_table, build_report
from d4pm.oracle import GaussianEpsPredictor, GaussianPrior, expected_sampler_output, joint_gaussian_posterior
from d4pm.sampler import SamplerConfig, joint_sample, seeded_generator, single_branch_sample, to_numpy
from d4pm.schedule import NoiseSchedule, make_schedule
from d4pm.signals import (
    ARTIFACT_CLASSES,
    ArtifactClass,
    DatasetSplit,
    MixedExample,
    Segment,
    SynthConfig,
    class_index,
    load_dataset,
    load_segments,
    save_segments,
    save_synthetic,
    synthesize,
)
from d4pm.trainer import Branch, TrainConfig, TrainResult, load_checkpoint, save_checkpoint, train_branch
from utils.utils_config import DEFAULT_SETTINGS, apply_thread_cap, load_config_file, resolve_setting
from utils.utils_logger import logger

#####################################
# Default Configurations
#####################################

VARIANTS = ("base", "base+artifacts", "full")
CHECKPOINT_DIR = "checkpoints"
DENOISED_DIR = "denoised"
REPORT_DIR = "report"

ORACLE_N = 16
ORACLE_RUNS = 1000
# Per-coordinate z threshold (standard errors of the sample mean).
ORACLE_Z_THRESHOLD = 3.0
IDENTITY_TOLERANCE = 1e-6

#####################################
# Run Configuration
#####################################


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings shared by every subcommand."""

    seed: int
    n: int
    steps: int
    beta_start: float
    beta_end: float
    lambda_dc: float
    lambda_snr: float
    epochs: int
    batch_size: int
    lr: float
    channels: int
    encoder_blocks: int
    heads: int
    film_embed_dim: int
    sample_rate: float
    out: pathlib.Path
    dataset: pathlib.Path

    def schedule(self) -> NoiseSchedule:
        return make_schedule(self.steps, self.beta_start, self.beta_end)

    def denoiser_config(self, use_class_labels: bool = True) -> DenoiserConfig:
        return DenoiserConfig(
            n=self.n,
            channels=self.channels,
            encoder_blocks=self.encoder_blocks,
            heads=self.heads,
            film_embed_dim=self.film_embed_dim,
            use_class_labels=use_class_labels,
        )

    def train_config(self, branch: Branch, fold_scale: bool = True, perturb_with_level: bool = False) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.lr,
            seed=self.seed,
            branch=branch,
            fold_scale=fold_scale,
            perturb_with_level=perturb_with_level,
        )

    def sampler_config(self, **overrides) -> SamplerConfig:
        return SamplerConfig(lambda_dc=self.lambda_dc, lambda_snr=self.lambda_snr, seed=self.seed, **overrides)

    def checkpoint_path(
        self, branch: Branch, use_class_labels: bool = True, classes: Optional[Sequence[ArtifactClass]] = None
    ) -> pathlib.Path:
        """out/checkpoints/<branch>[_nolabel][_<classes>]; the class tag is added for a strict subset only."""
        suffix = "" if use_class_labels else "_nolabel"
        tag = class_subset_tag(classes)
        if tag:
            suffix += f"_{tag}"
        return self.out / CHECKPOINT_DIR / f"{branch.value.lower()}{suffix}"


SETTING_CASTS = {key: type(value) for key, value in DEFAULT_SETTINGS.items()}


def resolve_run_config(args: argparse.Namespace) -> RunConfig:
    """Apply flag > config file > environment > default to every setting."""
    file_values = load_config_file(getattr(args, "config", None))
    values = {
        key: resolve_setting(key, getattr(args, key, None), file_values, SETTING_CASTS[key])
        for key in DEFAULT_SETTINGS
    }
    values["out"] = pathlib.Path(values["out"])
    values["dataset"] = pathlib.Path(values["dataset"])
    return RunConfig(**values)


def parse_classes(raw: Optional[str]) -> Optional[list[ArtifactClass]]:
    """Comma-separated artifact classes, e.g. 'eog,emg'; None keeps all."""
    if raw is None:
        return None
    classes = [ArtifactClass.parse(part) for part in raw.split(",") if part.strip()]
    if not classes or ArtifactClass.CLEAN in classes:
        raise ConfigError(f"--classes needs artifact classes (EOG, EMG, ECG), got {raw!r}")
    return classes


def class_subset_tag(classes: Optional[Sequence[ArtifactClass]]) -> str:
    """'EOG-EMG' style tag for a strict subset of the artifact classes, '' otherwise."""
    if classes is None:
        return ""
    chosen = sorted(set(classes), key=class_index)
    if set(chosen) >= set(ARTIFACT_CLASSES):
        return ""
    return "-".join(c.value for c in chosen)


def _load_dataset(cfg: RunConfig, classes: Optional[list[ArtifactClass]]) -> DatasetSplit:
    dataset = load_dataset(cfg.dataset)
    if classes is not None:
        dataset = dataset.restrict(classes)
        logger.info(f"Restricted dataset to {[c.value for c in classes]}")
    if dataset.test and len(dataset.test[0].clean) != cfg.n:
        raise ConfigError(f"dataset segments have length {len(dataset.test[0].clean)}, --n is {cfg.n}")
    return dataset


#####################################
# Subcommand: synth-data
#####################################


def cmd_synth_data(cfg: RunConfig, args: argparse.Namespace) -> int:
    if not cfg.out.is_dir():
        raise OutputPathError(f"output directory {cfg.out} does not exist")
    synth = SynthConfig(
        n=cfg.n,
        sample_rate=cfg.sample_rate,
        clean_count=args.clean_count,
        eog_count=args.per_class_count,
        emg_count=args.per_class_count,
        ecg_count=args.per_class_count,
        seed=cfg.seed,
    )
    sources, split = synthesize(synth)
    manifest = save_synthetic(cfg.out, synth, sources, split)
    logger.info(f"Wrote synthetic dataset manifest {manifest}")
    return EXIT_OK


#####################################
# Subcommand: train
#####################################


def train_one(
    cfg: RunConfig,
    dataset: DatasetSplit,
    branch: Branch,
    path: pathlib.Path,
    use_class_labels: bool = True,
    fold_scale: bool = True,
    perturb_with_level: bool = False,
    resume: bool = False,
) -> TrainResult:
    """Train (or continue) one branch, then write its checkpoint and loss-trace CSV."""
    schedule = cfg.schedule()
    state = None
    if resume:
        previous = load_checkpoint(path, expected_branch=branch)
        if previous.schedule.to_dict() != schedule.to_dict():
            raise ConfigError(f"{path}: checkpoint was trained with a different noise schedule")
        if previous.train_config.seed != cfg.seed:
            logger.warning(f"Resuming with seed {cfg.seed}; checkpoint used seed {previous.train_config.seed}")
        state = previous.state
    result = train_branch(
        dataset,
        cfg.train_config(branch, fold_scale=fold_scale, perturb_with_level=perturb_with_level),
        schedule,
        cfg.denoiser_config(use_class_labels),
        resume=state,
    )
    save_checkpoint(path, result)
    trace_path = path.parent / f"{path.name}_loss.csv"
    pd.DataFrame(result.loss_trace, columns=["epoch", "train_loss", "val_loss"]).to_csv(trace_path, index=False)
    return result


def _branches(raw: str) -> list[Branch]:
    return [Branch.EEG, Branch.ARTIFACT] if raw.lower() == "both" else [Branch.parse(raw)]


def _checkpoint_override(args: argparse.Namespace, branch: Branch) -> Optional[str]:
    return args.checkpoint_eeg if branch is Branch.EEG else args.checkpoint_artifact


def cmd_train(cfg: RunConfig, args: argparse.Namespace) -> int:
    classes = parse_classes(args.classes)
    dataset = _load_dataset(cfg, classes)
    use_labels = not args.no_class_labels
    for branch in _branches(args.branch):
        override = _checkpoint_override(args, branch)
        path = pathlib.Path(override) if override else cfg.checkpoint_path(branch, use_labels, classes)
        train_one(
            cfg,
            dataset,
            branch,
            path,
            use_class_labels=use_labels,
            fold_scale=not args.no_fold_scale,
            perturb_with_level=args.perturb_with_level,
            resume=args.resume,
        )
    return EXIT_OK


#####################################
# Subcommand: denoise
#####################################


def variant_uses_labels(variant: str) -> bool:
    return variant == "full"


def _trained_checkpoint(
    cfg: RunConfig, branch: Branch, labels: bool, classes: Optional[Sequence[ArtifactClass]]
) -> pathlib.Path:
    subset = cfg.checkpoint_path(branch, labels, classes)
    if subset.with_suffix(".json").is_file():
        return subset
    full = cfg.checkpoint_path(branch, labels)
    if subset != full:
        logger.info(f"No checkpoint at {subset}; using {full}")
    return full


def load_variant_models(
    cfg: RunConfig,
    variant: str,
    eeg_path: Optional[str] = None,
    artifact_path: Optional[str] = None,
    classes: Optional[Sequence[ArtifactClass]] = None,
) -> tuple[DualPathDenoiser, Optional[DualPathDenoiser]]:
    """
    Checkpointed networks for a variant; the base variant has no artifact branch.

    With a class subset the subset checkpoints are preferred and the full-data
    ones are the fallback.
    """
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    labels = variant_uses_labels(variant)
    eeg = load_checkpoint(eeg_path or _trained_checkpoint(cfg, Branch.EEG, labels, classes), expected_branch=Branch.EEG)
    models = [eeg]
    if variant != "base":
        models.append(
            load_checkpoint(artifact_path or _trained_checkpoint(cfg, Branch.ARTIFACT, labels, classes), expected_branch=Branch.ARTIFACT)
        )
    for result in models:
        if result.params.cfg.use_class_labels != labels:
            logger.warning(
                f"{variant} variant expects use_class_labels={labels}, "
                f"{result.train_config.branch.value} checkpoint has {result.params.cfg.use_class_labels}"
            )
        if result.params.cfg.n != cfg.n:
            raise ConfigError(f"checkpoint network expects n={result.params.cfg.n}, --n is {cfg.n}")
    return eeg.params, (models[1].params if len(models) > 1 else None)


def denoise_examples(
    examples: Sequence[MixedExample],
    eeg: DualPathDenoiser,
    artifact: Optional[DualPathDenoiser],
    schedule: NoiseSchedule,
    sampler_cfg: SamplerConfig,
    trace: Optional[list] = None,
) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Run the sampler over all examples as one batch; returns (clean, artifact) estimates."""
    y = torch.as_tensor(np.stack([e.mixture.samples for e in examples]), dtype=torch.float32)
    z = torch.as_tensor([class_index(e.class_label) for e in examples], dtype=torch.long)
    gen = seeded_generator(sampler_cfg.seed)
    if artifact is None:
        clean = single_branch_sample(eeg, y, z, schedule, sampler_cfg, rng=gen, trace=trace)
        return to_numpy(clean), None
    clean, art = joint_sample(eeg, artifact, y, z, schedule, sampler_cfg, rng=gen, trace=trace)
    return to_numpy(clean), to_numpy(art)


def _estimate_segments(values: np.ndarray, examples: Sequence[MixedExample]) -> list[Segment]:
    return [Segment(row, e.class_label, e.clean.sample_rate) for row, e in zip(values, examples)]


def dump_waveforms(
    path: pathlib.Path,
    examples: Sequence[MixedExample],
    clean_est: np.ndarray,
    art_est: Optional[np.ndarray],
    count: int,
) -> None:
    """Long-format CSV of clean, noisy, denoised and artifact-estimate samples."""
    frames = []
    for index, example in enumerate(examples[:count]):
        n = len(example.clean)
        frames.append(
            pd.DataFrame(
                {
                    "segment": index,
                    "class": example.class_label.value,
                    "sample": np.arange(n),
                    "time_s": np.arange(n) / example.clean.sample_rate,
                    "clean": example.clean.samples,
                    "noisy": example.mixture.samples,
                    "denoised": clean_est[index],
                    "artifact_estimate": art_est[index] if art_est is not None else np.nan,
                }
            )
        )
    pd.concat(frames, ignore_index=True).to_csv(path, index=False)
    logger.info(f"Wrote waveforms of {len(frames)} segments to {path}")


def cmd_denoise(cfg: RunConfig, args: argparse.Namespace) -> int:
    classes = parse_classes(args.classes)
    dataset = _load_dataset(cfg, classes)
    examples = dataset.test
    if not examples:
        raise ConfigError("test split is empty")
    eeg, artifact = load_variant_models(cfg, args.variant, args.checkpoint_eeg, args.checkpoint_artifact, classes)
    sampler_cfg = cfg.sampler_config(
        share_eta=not args.independent_eta,
        stochastic_level=args.stochastic_level,
        x0_formula=args.x0_formula,
    )
    trace: list[dict] = []
    logger.info(f"Denoising {len(examples)} test segments with the {args.variant} variant")
    clean_est, art_est = denoise_examples(examples, eeg, artifact, cfg.schedule(), sampler_cfg, trace)

    out_dir = cfg.out / DENOISED_DIR / args.variant
    save_segments(out_dir / "denoised", _estimate_segments(clean_est, examples))
    if art_est is not None:
        save_segments(out_dir / "artifact_estimate", _estimate_segments(art_est, examples))
    pd.DataFrame(trace).to_csv(out_dir / "residuals.csv", index=False)
    if args.dump_waveforms:
        dump_waveforms(out_dir / "waveforms.csv", examples, clean_est, art_est, args.dump_waveforms)
    logger.info(f"Wrote denoised segments to {out_dir}")
    return EXIT_OK


#####################################
# Subcommand: evaluate
#####################################


def evaluate_estimates(examples: Sequence[MixedExample], estimates: np.ndarray) -> tuple[MetricsReport, MetricsReport]:
    """Reports for the estimates and for the untouched mixtures."""
    report = build_report(list(estimates), examples)
    baseline = build_report([e.mixture.samples for e in examples], examples)
    return report, baseline


def cmd_evaluate(cfg: RunConfig, args: argparse.Namespace) -> int:
    dataset = _load_dataset(cfg, parse_classes(args.classes))
    examples = dataset.test
    if not examples:
        raise ConfigError("test split is empty")
    estimate_path = pathlib.Path(args.estimate) if args.estimate else cfg.out / DENOISED_DIR / args.variant / "denoised"
    estimates = load_segments(estimate_path)
    if len(estimates) != len(examples):
        raise ConfigError(f"{estimate_path} holds {len(estimates)} segments; the test split has {len(examples)}")
    report, baseline = evaluate_estimates(examples, np.stack([s.samples for s in estimates]))
    summary_path = report.save(cfg.out / REPORT_DIR / args.variant, baseline=baseline)
    overall = report.aggregate()["overall"]
    logger.info(
        f"{args.variant}: CC {overall['cc']['mean']:.4f}, SNR {overall['snr_out']['mean']:.2f} dB "
        f"(noisy input CC {baseline.aggregate()['overall']['cc']['mean']:.4f}); see {summary_path}"
    )
    return EXIT_OK


#####################################
# Subcommand: ablate
#####################################


def cmd_ablate(cfg: RunConfig, args: argparse.Namespace) -> int:
    classes = parse_classes(args.classes)
    dataset = _load_dataset(cfg, classes)
    examples = dataset.test
    if not examples:
        raise ConfigError("test split is empty")
    schedule = cfg.schedule()
    for labels in (False, True):
        for branch in (Branch.EEG, Branch.ARTIFACT):
            path = cfg.checkpoint_path(branch, labels, classes)
            if not path.with_suffix(".json").is_file():
                logger.info(f"No checkpoint at {path}; training it now")
                train_one(cfg, dataset, branch, path, use_class_labels=labels)

    reports = {}
    for variant in VARIANTS:
        eeg, artifact = load_variant_models(cfg, variant, classes=classes)
        clean_est, _ = denoise_examples(examples, eeg, artifact, schedule, cfg.sampler_config())
        reports[variant] = build_report(list(clean_est), examples)
        reports[variant].save(cfg.out / REPORT_DIR / variant)

    table = ablation_table(reports)
    table_path = cfg.out / "ablation.csv"
    table.to_csv(table_path)
    logger.info(f"Wrote ablation table {table.shape[0]}x{table.shape[1]} to {table_path}")
    return EXIT_OK


#####################################
# Subcommand: oracle-check
#####################################


def _z_scores(samples: np.ndarray, expected: np.ndarray) -> np.ndarray:
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / np.sqrt(samples.shape[0])
    diff = mean - expected
    # Deterministic coordinates (se == 0) must match exactly.
    return np.where(se > 0, diff / np.where(se > 0, se, 1.0), np.where(np.abs(diff) < 1e-12, 0.0, np.inf))


def run_oracle_checks(
    schedule: NoiseSchedule,
    lambda_dc: float,
    lambda_snr: float,
    seed: int,
    n: int = ORACLE_N,
    runs: int = ORACLE_RUNS,
    z_threshold: float = ORACLE_Z_THRESHOLD,
) -> list[dict]:
    """
    Sampler checks against closed-form Gaussian answers.

    joint_mean / single_mean: sample means of joint_sample and
    single_branch_sample against expected_sampler_output.
    symmetric_posterior: with identical priors, lambda_dc = 0.5 and
    lambda_snr = 1, the sample mean must equal the exact posterior mean y/2.
    measurement_identity: mean_x + lambda_snr mean_x' = y for the posterior
    and for the final joint samples when lambda_snr = 1.
    """
    rng = np.random.default_rng(seed)
    px = GaussianPrior(mean=0.5 * rng.standard_normal(n), std=1.0)
    pxp = GaussianPrior(mean=0.5 * rng.standard_normal(n), std=0.7)
    y = px.mean + px.std * rng.standard_normal(n) + lambda_snr * (pxp.mean + pxp.std * rng.standard_normal(n))
    batch_y = torch.as_tensor(np.tile(y, (runs, 1)), dtype=torch.float64)
    cfg = SamplerConfig(lambda_dc=lambda_dc, lambda_snr=lambda_snr, seed=seed)
    checks = []

    def record(name: str, z: np.ndarray) -> None:
        worst = float(np.max(np.abs(z)))
        checks.append(
            {
                "check": name,
                "max_abs_z": worst,
                "threshold": z_threshold,
                "passed": bool(worst <= z_threshold),
                "z_scores": [float(v) for v in z],
            }
        )

    eps_x, eps_xp = GaussianEpsPredictor(px), GaussianEpsPredictor(pxp)
    x0, x0p = joint_sample(eps_x, eps_xp, batch_y, 0, schedule, cfg)
    expected_x, expected_xp = expected_sampler_output(eps_x, eps_xp, y, schedule, cfg)
    record("joint_mean_x", _z_scores(to_numpy(x0), expected_x))
    record("joint_mean_x_prime", _z_scores(to_numpy(x0p), expected_xp))

    single = single_branch_sample(eps_x, batch_y, 0, schedule, cfg)
    record("single_mean_x", _z_scores(to_numpy(single), expected_sampler_output(eps_x, None, y, schedule, cfg)))

    sym_prior = GaussianPrior(mean=px.mean, std=1.0)
    sym_cfg = SamplerConfig(lambda_dc=0.5, lambda_snr=1.0, seed=seed + 1)
    sym_eps = GaussianEpsPredictor(sym_prior)
    sx0, _ = joint_sample(sym_eps, sym_eps, batch_y, 0, schedule, sym_cfg)
    posterior_x = joint_gaussian_posterior(sym_prior, sym_prior, 1.0, y)[0]
    record("symmetric_posterior_x", _z_scores(to_numpy(sx0), posterior_x))

    mean_x, _, mean_xp, _ = joint_gaussian_posterior(px, pxp, lambda_snr, y)
    gaps = [float(np.max(np.abs(mean_x + lambda_snr * mean_xp - y)))]
    if lambda_snr == 1.0:
        gaps.append(float(np.max(np.abs(to_numpy(x0) + to_numpy(x0p) - y[None, :]))))
    gap = max(gaps)
    checks.append(
        {
            "check": "measurement_identity",
            "max_abs_gap": gap,
            "threshold": IDENTITY_TOLERANCE,
            "passed": bool(gap <= IDENTITY_TOLERANCE * max(1.0, float(np.linalg.norm(y)))),
        }
    )
    return checks


def cmd_oracle_check(cfg: RunConfig, args: argparse.Namespace) -> int:
    checks = run_oracle_checks(
        cfg.schedule(),
        cfg.lambda_dc,
        cfg.lambda_snr,
        cfg.seed,
        n=args.oracle_n,
        runs=args.runs,
        z_threshold=args.z_threshold,
    )
    cfg.out.mkdir(parents=True, exist_ok=True)
    rows = [
        {"check": c["check"], "coordinate": i, "z": z}
        for c in checks
        for i, z in enumerate(c.get("z_scores", []))
    ]
    pd.DataFrame(rows, columns=["check", "coordinate", "z"]).to_csv(cfg.out / "oracle_check.csv", index=False)
    (cfg.out / "oracle_check.json").write_text(json.dumps({"checks": checks}, indent=2) + "\n")
    for c in checks:
        score = c.get("max_abs_z", c.get("max_abs_gap"))
        message = f"oracle {c['check']}: {score:.4g} (threshold {c['threshold']})"
        if c["passed"]:
            logger.info(f"{message} PASS")
        else:
            logger.error(f"{message} FAIL")
    failed = [c["check"] for c in checks if not c["passed"]]
    if failed:
        raise CheckFailedError(f"oracle checks failed: {failed}")
    return EXIT_OK


#####################################
# Argument Parsing
#####################################


def _shared_flags() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="flat KEY=value settings file")
    shared.add_argument("--seed", type=int)
    shared.add_argument("--n", type=int, help="segment length")
    shared.add_argument("--steps", type=int, help="diffusion steps T")
    shared.add_argument("--beta-start", type=float)
    shared.add_argument("--beta-end", type=float)
    shared.add_argument("--lambda-dc", type=float)
    shared.add_argument("--lambda-snr", type=float)
    shared.add_argument("--epochs", type=int)
    shared.add_argument("--batch-size", type=int)
    shared.add_argument("--lr", type=float)
    shared.add_argument("--channels", type=int)
    shared.add_argument("--encoder-blocks", type=int)
    shared.add_argument("--heads", type=int)
    shared.add_argument("--film-embed-dim", type=int)
    shared.add_argument("--sample-rate", type=float)
    shared.add_argument("--out")
    shared.add_argument("--dataset")
    return shared


def _add_checkpoint_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--checkpoint-eeg")
    parser.add_argument("--checkpoint-artifact")


def build_parser() -> argparse.ArgumentParser:
    shared = _shared_flags()
    parser = argparse.ArgumentParser(prog="d4pm", description="Dual-branch diffusion artifact removal")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth-data", parents=[shared], help="generate the desk-scale dataset")
    synth.add_argument("--clean-count", type=int, default=250)
    synth.add_argument("--per-class-count", type=int, default=250)

    train = commands.add_parser("train", parents=[shared], help="train the EEG and/or artifact branch")
    train.add_argument("--branch", default="both", choices=["eeg", "artifact", "both"])
    train.add_argument("--resume", action="store_true", help="continue from the existing checkpoint")
    train.add_argument("--classes", help="comma-separated artifact classes to train on")
    train.add_argument("--no-class-labels", action="store_true")
    train.add_argument("--no-fold-scale", action="store_true")
    train.add_argument("--perturb-with-level", action="store_true")
    _add_checkpoint_flags(train)

    denoise = commands.add_parser("denoise", parents=[shared], help="denoise the test split")
    denoise.add_argument("--variant", default="full", choices=VARIANTS)
    denoise.add_argument("--classes")
    denoise.add_argument("--dump-waveforms", type=int, default=0, metavar="K")
    denoise.add_argument("--x0-formula", default="standard", choices=["standard", "legacy"])
    denoise.add_argument("--independent-eta", action="store_true")
    denoise.add_argument("--stochastic-level", action="store_true")
    _add_checkpoint_flags(denoise)

    evaluate = commands.add_parser("evaluate", parents=[shared], help="score denoised segments")
    evaluate.add_argument("--variant", default="full", choices=VARIANTS)
    evaluate.add_argument("--estimate", help="denoised segment file (default: output of denoise)")
    evaluate.add_argument("--classes")

    ablate = commands.add_parser("ablate", parents=[shared], help="compare base, base+artifacts and full")
    ablate.add_argument("--classes")

    oracle = commands.add_parser("oracle-check", parents=[shared], help="verify the sampler on Gaussian priors")
    oracle.add_argument("--runs", type=int, default=ORACLE_RUNS)
    oracle.add_argument("--oracle-n", type=int, default=ORACLE_N)
    oracle.add_argument("--z-threshold", type=float, default=ORACLE_Z_THRESHOLD)
    return parser


COMMANDS = {
    "synth-data": cmd_synth_data,
    "train": cmd_train,
    "denoise": cmd_denoise,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "oracle-check": cmd_oracle_check,
}

#####################################
# Main Function
#####################################


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, run one subcommand and map failures to exit codes.

    Returns the exit code instead of exiting so tests can call it directly.
    """
    args = build_parser().parse_args(argv)
    logger.info(f"START d4pm {args.command}")
    try:
        apply_thread_cap()
        cfg = resolve_run_config(args)
        code = COMMANDS[args.command](cfg, args)
    except D4PMError as e:
        logger.error(f"{args.command} failed: {e}")
        return e.exit_code
    except OSError as e:
        logger.error(f"{args.command} I/O error: {e}")
        return EXIT_IO
    logger.info(f"END d4pm {args.command}")
    return code


#####################################
# Conditional Execution
#####################################

if __name__ == "__main__":
    sys.exit(main())

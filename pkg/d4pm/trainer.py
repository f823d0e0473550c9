"""
trainer.py - training examples from the forward process, branch training, checkpoints.

The EEG branch regresses the noise added to the clean signal x; the artifact
branch regresses the noise added to the artifact contribution (lambda_snr * x'
when fold_scale is on, x' otherwise). Both condition on the mixture y.

Checkpoint format:
    <stem>.json  manifest (configs, schedule, branch, epochs, loss trace, tensor table)
    <stem>.f32   little-endian float32 tensors, concatenated in table order
"""

#####################################
# Import Modules
#####################################

# Import packages from Python Standard Library
import copy
import json
import math
import pathlib
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Optional, Sequence

# Import external packages
import numpy as np
import torch

# Import functions from local modules
from d4pm.denoiser import DenoiserConfig, DualPathDenoiser, TrainingBatch, init_params, l1_loss
from d4pm.errors import CheckpointError, ConfigError, TrainingDivergedError
from d4pm.schedule import ContinuousLevel, NoiseSchedule, sample_continuous_level, sample_continuous_levels
from d4pm.signals import DatasetSplit, MixedExample, Segment, class_index
from utils.utils_logger import logger

#####################################
# Default Configurations
#####################################

CHECKPOINT_VERSION = 1

# Seed-sequence stream ids keep the epoch and validation draws of the two
# branches independent of each other.
_VALIDATION_STREAM = 10**6

#####################################
# Configuration
#####################################


class Branch(str, Enum):
    EEG = "EEG"
    ARTIFACT = "ARTIFACT"

    @classmethod
    def parse(cls, value: "str | Branch") -> "Branch":
        if isinstance(value, Branch):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError as e:
            raise ConfigError(f"unknown branch {value!r}; expected EEG or ARTIFACT") from e

    @property
    def stream(self) -> int:
        return 0 if self is Branch.EEG else 1


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    seed: int = 0
    branch: Branch = Branch.EEG
    fold_scale: bool = True
    perturb_with_level: bool = False

    def __post_init__(self):
        object.__setattr__(self, "branch", Branch.parse(self.branch))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be positive")
        if self.learning_rate < 0 or self.eps <= 0:
            raise ConfigError("learning_rate must be >= 0 and eps > 0")
        if len(self.betas) != 2 or not all(0.0 <= b < 1.0 for b in self.betas):
            raise ConfigError(f"adam betas must lie in [0, 1), got {self.betas}")

    def to_dict(self) -> dict:
        data = asdict(self)
        data["branch"] = self.branch.value
        data["betas"] = list(self.betas)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**data)


#####################################
# Training Examples
#####################################


@dataclass(frozen=True)
class TrainingExample:
    x_t: np.ndarray
    eps: np.ndarray
    level: ContinuousLevel
    z: int


def make_training_example(
    x0: "Segment | np.ndarray",
    y: "Segment | np.ndarray",
    z,
    s: NoiseSchedule,
    rng: np.random.Generator,
    t: Optional[int] = None,
    eps: Optional[np.ndarray] = None,
) -> TrainingExample:
    """
    Diffuse x0 to a random step: x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.

    The network is conditioned on a continuous level drawn for the same t.
    `t` and `eps` override the random draws (used by tests).
    """
    x0 = x0.samples if isinstance(x0, Segment) else np.asarray(x0, dtype=np.float64)
    y = y.samples if isinstance(y, Segment) else np.asarray(y, dtype=np.float64)
    if x0.shape != y.shape:
        raise ConfigError(f"x0 {x0.shape} and y {y.shape} differ in shape")
    step = int(rng.integers(1, s.T + 1)) if t is None else int(t)
    s.check_step(step)
    noise = rng.standard_normal(x0.shape) if eps is None else np.asarray(eps, dtype=np.float64)
    abar = s.alpha_bar_at(step)
    x_t = math.sqrt(abar) * x0 + math.sqrt(1.0 - abar) * noise
    level = sample_continuous_level(s, step, rng)
    return TrainingExample(x_t=x_t, eps=noise, level=level, z=class_index(z))


def regression_target(example: MixedExample, branch: Branch, fold_scale: bool = True) -> np.ndarray:
    """Signal the given branch learns to reconstruct."""
    if branch is Branch.EEG:
        return example.clean.samples
    return example.scaled_artifact if fold_scale else example.artifact.samples


def make_training_batch(
    examples: Sequence[MixedExample],
    cfg: TrainConfig,
    s: NoiseSchedule,
    rng: np.random.Generator,
    dtype: torch.dtype = torch.float32,
) -> TrainingBatch:
    """Vectorized make_training_example over a list of mixed examples."""
    x0 = np.stack([regression_target(e, cfg.branch, cfg.fold_scale) for e in examples])
    y = np.stack([e.mixture.samples for e in examples])
    z = np.array([class_index(e.class_label) for e in examples], dtype=np.int64)

    t = rng.integers(1, s.T + 1, size=len(examples))
    eps = rng.standard_normal(x0.shape)
    level = sample_continuous_levels(s, t, rng)
    coef = level if cfg.perturb_with_level else np.sqrt(s.alpha_bar[t - 1])
    x_t = coef[:, None] * x0 + np.sqrt(1.0 - coef**2)[:, None] * eps

    return TrainingBatch(
        x_t=torch.as_tensor(x_t, dtype=dtype),
        y=torch.as_tensor(y, dtype=dtype),
        level=torch.as_tensor(level, dtype=dtype),
        z=torch.as_tensor(z),
        eps=torch.as_tensor(eps, dtype=dtype),
    )


#####################################
# Training
#####################################


@dataclass
class TrainState:
    """Everything needed to continue an interrupted run bit-exactly."""

    epoch: int
    last_params: dict
    optimizer: dict
    best_params: dict
    best_val_loss: float
    best_epoch: int
    loss_trace: list = field(default_factory=list)


@dataclass
class TrainResult:
    params: DualPathDenoiser
    loss_trace: list
    state: TrainState
    train_config: TrainConfig
    schedule: NoiseSchedule

    def __iter__(self):
        # Unpacks as (params, loss_trace).
        return iter((self.params, self.loss_trace))


def _epoch_rng(cfg: TrainConfig, epoch: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, cfg.branch.stream, epoch])


def _validation_rng(cfg: TrainConfig) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, cfg.branch.stream, _VALIDATION_STREAM])


def evaluate_loss(
    params: DualPathDenoiser,
    examples: Sequence[MixedExample],
    cfg: TrainConfig,
    s: NoiseSchedule,
    rng: np.random.Generator,
) -> float:
    """Example-weighted mean L1 loss over `examples` without updating anything."""
    if not examples:
        return math.nan
    total = 0.0
    with torch.no_grad():
        for start in range(0, len(examples), cfg.batch_size):
            batch = make_training_batch(examples[start : start + cfg.batch_size], cfg, s, rng)
            total += float(l1_loss(params, batch)) * len(batch)
    return total / len(examples)


def _apply_optimizer_settings(optimizer: torch.optim.Adam, cfg: TrainConfig) -> None:
    # load_state_dict restores the saved hyperparameters; the current config wins.
    for group in optimizer.param_groups:
        if group["lr"] != cfg.learning_rate:
            logger.info(f"Resuming with lr={cfg.learning_rate} (checkpoint used {group['lr']})")
        group["lr"] = cfg.learning_rate
        group["betas"] = cfg.betas
        group["eps"] = cfg.eps


def train_branch(
    dataset: DatasetSplit,
    cfg: TrainConfig,
    s: NoiseSchedule,
    denoiser_cfg: Optional[DenoiserConfig] = None,
    resume: Optional[TrainState] = None,
) -> TrainResult:
    """
    Train one branch with Adam and keep the best-validation parameters.

    Batches are drawn in a seed-determined order with fresh (t, eps, level)
    each epoch; validation uses the same noise draws every epoch.

    Args:
        dataset: Mixed dataset; only train and validation are read.
        cfg: Optimizer and branch settings.
        s: Noise schedule.
        denoiser_cfg: Network shape; defaults to DenoiserConfig(n=segment length).
        resume: State from a checkpoint to continue from.

    Returns:
        TrainResult unpacking to (best params, loss trace).
    """
    train = list(dataset.train)
    if not train:
        raise ConfigError("training split is empty")
    denoiser_cfg = denoiser_cfg or DenoiserConfig(n=len(train[0].clean))
    if len(train[0].clean) != denoiser_cfg.n:
        raise ConfigError(f"segments have length {len(train[0].clean)}, network expects {denoiser_cfg.n}")

    model = init_params(denoiser_cfg, cfg.seed).float()
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate, betas=cfg.betas, eps=cfg.eps)
    trace: list[dict] = []
    best_val, best_epoch = math.inf, 0
    best_state = copy.deepcopy(model.state_dict())
    start_epoch = 0
    if resume is not None:
        model.load_state_dict(resume.last_params)
        optimizer.load_state_dict(resume.optimizer)
        _apply_optimizer_settings(optimizer, cfg)
        trace = [dict(row) for row in resume.loss_trace]
        best_val, best_epoch = resume.best_val_loss, resume.best_epoch
        best_state = copy.deepcopy(resume.best_params)
        start_epoch = resume.epoch
        logger.info(f"Resuming {cfg.branch.value} branch from epoch {start_epoch}")
    if start_epoch >= cfg.epochs:
        logger.warning(f"Checkpoint already at epoch {start_epoch}; nothing to train")

    logger.info(
        f"Training {cfg.branch.value} branch: {len(train)} examples, "
        f"epochs={cfg.epochs}, batch={cfg.batch_size}, lr={cfg.learning_rate}"
    )
    for epoch in range(start_epoch + 1, cfg.epochs + 1):
        rng = _epoch_rng(cfg, epoch)
        order = rng.permutation(len(train))
        model.train()
        total = 0.0
        for batch_index, start in enumerate(range(0, len(train), cfg.batch_size)):
            batch = make_training_batch([train[i] for i in order[start : start + cfg.batch_size]], cfg, s, rng)
            optimizer.zero_grad(set_to_none=True)
            loss = l1_loss(model, batch)
            if not torch.isfinite(loss):
                logger.error(f"Non-finite loss at epoch {epoch}, batch {batch_index}")
                raise TrainingDivergedError(epoch, batch_index, float(loss))
            loss.backward()
            optimizer.step()
            loss_value = float(loss.detach())
            total += loss_value * len(batch)
            logger.debug(f"epoch {epoch} batch {batch_index} loss {loss_value:.6f}")

        model.eval()
        train_loss = total / len(train)
        val_loss = evaluate_loss(model, dataset.validation, cfg, s, _validation_rng(cfg))
        score = train_loss if math.isnan(val_loss) else val_loss
        if score < best_val:
            best_val, best_epoch = score, epoch
            best_state = copy.deepcopy(model.state_dict())
        trace.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        logger.info(
            f"[{cfg.branch.value}] epoch {epoch}/{cfg.epochs} train={train_loss:.5f} val={val_loss:.5f}"
        )

    state = TrainState(
        epoch=max(start_epoch, cfg.epochs),
        last_params=copy.deepcopy(model.state_dict()),
        optimizer=copy.deepcopy(optimizer.state_dict()),
        best_params=best_state,
        best_val_loss=best_val,
        best_epoch=best_epoch,
        loss_trace=trace,
    )
    best = init_params(denoiser_cfg, cfg.seed).float()
    best.load_state_dict(best_state)
    best.eval()
    logger.info(f"[{cfg.branch.value}] best epoch {best_epoch} (loss {best_val:.5f})")
    return TrainResult(params=best, loss_trace=trace, state=state, train_config=cfg, schedule=s)


#####################################
# Checkpoints
#####################################


def _stem(path: "str | pathlib.Path") -> pathlib.Path:
    path = pathlib.Path(path)
    return path.with_suffix("") if path.suffix in (".json", ".f32") else path


def save_checkpoint(path: "str | pathlib.Path", result: TrainResult) -> pathlib.Path:
    """Write manifest + float32 blob; returns the manifest path."""
    stem = _stem(path)
    state = result.state
    named: list[tuple[str, torch.Tensor]] = []
    named += [(f"param.{k}", v) for k, v in result.params.state_dict().items()]
    named += [(f"last.{k}", v) for k, v in state.last_params.items()]

    param_names = [name for name, _ in result.params.named_parameters()]
    opt_state = state.optimizer.get("state", {})
    step = 0
    for index, name in enumerate(param_names):
        moments = opt_state.get(index)
        if moments is None:
            continue
        step = int(float(moments["step"]))
        named.append((f"adam.exp_avg.{name}", moments["exp_avg"]))
        named.append((f"adam.exp_avg_sq.{name}", moments["exp_avg_sq"]))

    table, chunks, offset = [], [], 0
    for name, tensor in named:
        array = tensor.detach().cpu().numpy().astype("<f4").ravel()
        table.append({"name": name, "shape": list(tensor.shape), "offset": offset})
        chunks.append(array)
        offset += array.size

    manifest = {
        "version": CHECKPOINT_VERSION,
        "branch": result.train_config.branch.value,
        "denoiser": result.params.cfg.to_dict(),
        "train": result.train_config.to_dict(),
        "schedule": result.schedule.to_dict(),
        "epoch": state.epoch,
        "best_epoch": state.best_epoch,
        "best_val_loss": state.best_val_loss,
        "optimizer_step": step,
        "loss_trace": state.loss_trace,
        "tensors": table,
    }
    stem.parent.mkdir(parents=True, exist_ok=True)
    blob = np.concatenate(chunks) if chunks else np.zeros(0, dtype="<f4")
    stem.with_suffix(".f32").write_bytes(blob.tobytes())
    manifest_path = stem.with_suffix(".json")
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    logger.info(f"Saved {result.train_config.branch.value} checkpoint to {manifest_path}")
    return manifest_path


def _restore(prefix: str, reference: dict, tensors: dict, where: pathlib.Path) -> dict:
    restored = {}
    for key, ref in reference.items():
        name = f"{prefix}.{key}"
        if name not in tensors:
            raise CheckpointError(f"{where}: missing tensor {name}")
        if tuple(tensors[name].shape) != tuple(ref.shape):
            raise CheckpointError(
                f"{where}: tensor {name} has shape {tuple(tensors[name].shape)}, network expects {tuple(ref.shape)}"
            )
        restored[key] = tensors[name]
    return restored


def load_checkpoint(path: "str | pathlib.Path", expected_branch: "str | Branch | None" = None) -> TrainResult:
    """
    Read a checkpoint written by save_checkpoint.

    Raises CheckpointError on version, branch, tensor-key, shape or blob-size mismatch.
    """
    stem = _stem(path)
    manifest_path = stem.with_suffix(".json")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as e:
        raise CheckpointError(f"{manifest_path}: manifest is not valid JSON ({e})") from e
    if manifest.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{manifest_path}: checkpoint version {manifest.get('version')}, expected {CHECKPOINT_VERSION}"
        )
    branch = Branch.parse(manifest["branch"])
    if expected_branch is not None and branch is not Branch.parse(expected_branch):
        raise CheckpointError(
            f"{manifest_path}: checkpoint holds the {branch.value} branch, expected {Branch.parse(expected_branch).value}"
        )

    table = manifest["tensors"]
    expected = 4 * sum(int(np.prod(entry["shape"], dtype=np.int64)) for entry in table)
    blob_path = stem.with_suffix(".f32")
    raw = blob_path.read_bytes()
    if len(raw) != expected:
        raise CheckpointError(f"{blob_path}: expected {expected} bytes of tensors, got {len(raw)}")
    flat = np.frombuffer(raw, dtype="<f4")
    tensors = {}
    for entry in table:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        chunk = flat[entry["offset"] : entry["offset"] + count]
        tensors[entry["name"]] = torch.from_numpy(chunk.copy()).reshape(entry["shape"])

    denoiser_cfg = DenoiserConfig.from_dict(manifest["denoiser"])
    train_cfg = TrainConfig.from_dict(manifest["train"])
    schedule = NoiseSchedule.from_dict(manifest["schedule"])
    params = init_params(denoiser_cfg, train_cfg.seed).float()
    reference = params.state_dict()
    params.load_state_dict(_restore("param", reference, tensors, blob_path))
    params.eval()
    last = _restore("last", reference, tensors, blob_path)

    optimizer = torch.optim.Adam(params.parameters(), lr=train_cfg.learning_rate, betas=train_cfg.betas, eps=train_cfg.eps)
    opt_state = optimizer.state_dict()
    for index, (name, _) in enumerate(params.named_parameters()):
        if f"adam.exp_avg.{name}" in tensors:
            opt_state["state"][index] = {
                "step": torch.tensor(float(manifest["optimizer_step"])),
                "exp_avg": tensors[f"adam.exp_avg.{name}"],
                "exp_avg_sq": tensors[f"adam.exp_avg_sq.{name}"],
            }

    state = TrainState(
        epoch=int(manifest["epoch"]),
        last_params=last,
        optimizer=opt_state,
        best_params=copy.deepcopy(params.state_dict()),
        best_val_loss=float(manifest["best_val_loss"]),
        best_epoch=int(manifest["best_epoch"]),
        loss_trace=manifest["loss_trace"],
    )
    logger.info(f"Loaded {branch.value} checkpoint from {manifest_path} (epoch {state.epoch})")
    return TrainResult(params=params, loss_trace=state.loss_trace, state=state, train_config=train_cfg, schedule=schedule)

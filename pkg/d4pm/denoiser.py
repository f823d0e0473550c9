"""
denoiser.py - dual-path conditional epsilon-prediction network with Dual-FiLM.

Path A reads the diffused signal x_t, path B reads the noisy conditioner y.
Each path is a two-layer conv stack followed by E pre-norm Transformer
encoder blocks. A shared FiLM trunk embeds the continuous noise level (and
the artifact class) and emits per-channel (gamma, xi) for 2 * (E + 1) sites:

    sites 0..E        path A: after the conv stack, then after each encoder block
    sites E+1..2E+1   path B: same order

Both paths are concatenated (2C channels), fused by a 1x1 conv and projected
to one channel by a final conv.

Tensors are laid out (batch, channels, length) around convolutions and
(batch, length, channels) inside the encoder blocks.
"""

#####################################
# Import Modules
#####################################

# Import packages from Python Standard Library
import math
from dataclasses import asdict, dataclass
from typing import Any, Sequence, Union

# Import external packages
import torch
import torch.nn as nn
import torch.nn.functional as F

# Import functions from local modules
from d4pm.errors import ConfigError
from d4pm.schedule import ContinuousLevel
from d4pm.signals import ARTIFACT_CLASSES, ArtifactClass, class_index

#####################################
# Default Configurations
#####################################

# Multiplier applied to the level before the sinusoidal embedding,
# so levels in (0, 1] spread over many periods.
LEVEL_SCALE = 5000.0

LevelLike = Union[ContinuousLevel, float, torch.Tensor]
ClassLike = Union[ArtifactClass, str, int, torch.Tensor]

#####################################
# Configuration
#####################################


@dataclass(frozen=True)
class DenoiserConfig:
    """Shape hyperparameters of one denoising network."""

    n: int = 64
    channels: int = 32
    encoder_blocks: int = 3
    heads: int = 4
    film_embed_dim: int = 32
    n_classes: int = 3
    kernel_size: int = 5
    use_class_labels: bool = True

    def __post_init__(self):
        if self.n < 8:
            raise ConfigError(f"segment length n must be >= 8, got {self.n}")
        if self.channels < 1 or self.heads < 1:
            raise ConfigError("channels and heads must be positive")
        if self.channels % self.heads:
            raise ConfigError(f"channels={self.channels} not divisible by heads={self.heads}")
        if self.encoder_blocks < 1:
            raise ConfigError(f"encoder_blocks must be >= 1, got {self.encoder_blocks}")
        if self.film_embed_dim < 2 or self.film_embed_dim % 2:
            raise ConfigError(f"film_embed_dim must be a positive even number, got {self.film_embed_dim}")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigError(f"kernel_size must be odd, got {self.kernel_size}")
        if self.n_classes < 1:
            raise ConfigError("n_classes must be positive")

    @property
    def n_sites(self) -> int:
        return 2 * (self.encoder_blocks + 1)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DenoiserConfig":
        return cls(**data)


#####################################
# Building Blocks
#####################################


def level_embedding(level: torch.Tensor, dim: int) -> torch.Tensor:
    """Sinusoidal embedding of the continuous noise level, shape (B, dim)."""
    half = dim // 2
    exponent = torch.arange(half, dtype=level.dtype, device=level.device) / half
    freqs = torch.exp(-math.log(10000.0) * exponent)
    angles = LEVEL_SCALE * level[:, None] * freqs[None, :]
    return torch.cat([torch.sin(angles), torch.cos(angles)], dim=-1)


class ConvStack(nn.Module):
    """Shallow feature extractor: conv(1 -> C), conv(C -> C), SiLU after each."""

    def __init__(self, channels: int, kernel_size: int):
        super().__init__()
        padding = kernel_size // 2
        self.conv1 = nn.Conv1d(1, channels, kernel_size, padding=padding)
        self.conv2 = nn.Conv1d(channels, channels, kernel_size, padding=padding)

    def forward(self, signal: torch.Tensor) -> torch.Tensor:
        h = F.silu(self.conv1(signal[:, None, :]))
        return F.silu(self.conv2(h))


class EncoderBlock(nn.Module):
    """Pre-norm Transformer encoder block with a 2C-wide SiLU feed-forward."""

    def __init__(self, channels: int, heads: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(channels)
        self.attn = nn.MultiheadAttention(channels, heads, dropout=0.0, batch_first=True)
        self.norm2 = nn.LayerNorm(channels)
        self.ff = nn.Sequential(
            nn.Linear(channels, 2 * channels),
            nn.SiLU(),
            nn.Linear(2 * channels, channels),
        )

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        q = self.norm1(h)
        h = h + self.attn(q, q, q, need_weights=False)[0]
        return h + self.ff(self.norm2(h))


def modulate(h: torch.Tensor, gamma: torch.Tensor, xi: torch.Tensor) -> torch.Tensor:
    """h <- gamma * h + xi per channel, broadcast over time; h is (B, C, N)."""
    return gamma[:, :, None] * h + xi[:, :, None]


class FeaturePath(nn.Module):
    """Conv stack, learned per-position bias and E encoder blocks, FiLM after each stage."""

    def __init__(self, cfg: DenoiserConfig):
        super().__init__()
        self.conv = ConvStack(cfg.channels, cfg.kernel_size)
        self.position_bias = nn.Parameter(torch.zeros(cfg.n))
        self.blocks = nn.ModuleList(EncoderBlock(cfg.channels, cfg.heads) for _ in range(cfg.encoder_blocks))

    def forward(self, signal: torch.Tensor, films: Sequence[tuple[torch.Tensor, torch.Tensor]]) -> torch.Tensor:
        h = modulate(self.conv(signal), *films[0])
        h = h + self.position_bias[None, None, :]
        for block, (gamma, xi) in zip(self.blocks, films[1:]):
            h = block(h.transpose(1, 2)).transpose(1, 2)
            h = modulate(h, gamma, xi)
        return h


class DualFiLM(nn.Module):
    """Shared trunk embedding (level, class) into per-site (gamma, xi)."""

    def __init__(self, cfg: DenoiserConfig):
        super().__init__()
        dim = cfg.film_embed_dim
        self.embed_dim = dim
        self.channels = cfg.channels
        self.level_mlp = nn.Sequential(nn.Linear(dim, dim), nn.SiLU(), nn.Linear(dim, dim))
        self.class_embedding = nn.Embedding(cfg.n_classes, dim) if cfg.use_class_labels else None
        self.heads = nn.ModuleList(nn.Linear(dim, 2 * cfg.channels) for _ in range(cfg.n_sites))

    def forward(self, level: torch.Tensor, z: torch.Tensor) -> list[tuple[torch.Tensor, torch.Tensor]]:
        cond = self.level_mlp(level_embedding(level, self.embed_dim))
        if self.class_embedding is not None:
            cond = cond + self.class_embedding(z)
        cond = F.silu(cond)
        films = []
        for head in self.heads:
            out = head(cond)
            films.append((1.0 + out[:, : self.channels], out[:, self.channels :]))
        return films


#####################################
# Network
#####################################


class DualPathDenoiser(nn.Module):
    """The epsilon-prediction network; one independent instance per branch."""

    def __init__(self, cfg: DenoiserConfig):
        super().__init__()
        self.cfg = cfg
        self.path_a = FeaturePath(cfg)
        self.path_b = FeaturePath(cfg)
        self.film = DualFiLM(cfg)
        self.fusion = nn.Conv1d(2 * cfg.channels, cfg.channels, 1)
        self.output = nn.Conv1d(cfg.channels, 1, cfg.kernel_size, padding=cfg.kernel_size // 2)

    def reset_parameters(self) -> None:
        """Fan-in scaled uniform weights; identity FiLM heads; zero position bias."""
        with torch.no_grad():
            for module in self.modules():
                if isinstance(module, (nn.Linear, nn.Conv1d)):
                    fan_in = module.weight[0].numel()
                    bound = 1.0 / math.sqrt(fan_in)
                    nn.init.uniform_(module.weight, -bound, bound)
                    if module.bias is not None:
                        nn.init.uniform_(module.bias, -bound, bound)
                elif isinstance(module, nn.MultiheadAttention):
                    bound = 1.0 / math.sqrt(module.embed_dim)
                    nn.init.uniform_(module.in_proj_weight, -bound, bound)
                    nn.init.zeros_(module.in_proj_bias)
                elif isinstance(module, nn.Embedding):
                    nn.init.uniform_(module.weight, -1.0, 1.0)
                elif isinstance(module, nn.LayerNorm):
                    nn.init.ones_(module.weight)
                    nn.init.zeros_(module.bias)
            for head in self.film.heads:
                nn.init.zeros_(head.weight)
                nn.init.zeros_(head.bias)
            self.path_a.position_bias.zero_()
            self.path_b.position_bias.zero_()

    def film_params(self, level: torch.Tensor, z: torch.Tensor) -> list[tuple[torch.Tensor, torch.Tensor]]:
        return self.film(level, z)

    def forward(self, x_t: torch.Tensor, y: torch.Tensor, level: LevelLike, z: ClassLike) -> torch.Tensor:
        """
        Predict the injected noise.

        Args:
            x_t: (B, N) or (N,) diffused signal.
            y: same shape, noisy conditioner.
            level: (B,) continuous levels, or a scalar / ContinuousLevel.
            z: (B,) class indices, or a single class label.

        Returns:
            eps_hat with the shape of x_t.
        """
        squeeze = x_t.dim() == 1
        x_t, y, level, z = self._prepare(x_t, y, level, z)
        films = self.film(level, z)
        e = self.cfg.encoder_blocks
        h_a = self.path_a(x_t, films[: e + 1])
        h_b = self.path_b(y, films[e + 1 :])
        h = F.silu(self.fusion(torch.cat([h_a, h_b], dim=1)))
        eps_hat = self.output(h)[:, 0, :]
        return eps_hat[0] if squeeze else eps_hat

    def _prepare(self, x_t, y, level, z):
        if x_t.shape != y.shape:
            raise ConfigError(f"x_t {tuple(x_t.shape)} and y {tuple(y.shape)} differ in shape")
        if x_t.dim() == 1:
            x_t, y = x_t[None, :], y[None, :]
        if x_t.dim() != 2 or x_t.shape[-1] != self.cfg.n:
            raise ConfigError(f"expected signals of length {self.cfg.n}, got shape {tuple(x_t.shape)}")
        if not (torch.isfinite(x_t).all() and torch.isfinite(y).all()):
            raise ConfigError("non-finite values in denoiser input")
        batch = x_t.shape[0]
        return x_t, y, as_level_tensor(level, batch, x_t), as_class_tensor(z, batch, x_t.device, self.cfg.n_classes)


#####################################
# Conversion Helpers
#####################################


def as_level_tensor(level: LevelLike, batch: int, like: torch.Tensor) -> torch.Tensor:
    if isinstance(level, ContinuousLevel):
        level = level.value
    level = torch.as_tensor(level, dtype=like.dtype, device=like.device)
    if level.dim() == 0:
        level = level.expand(batch)
    if level.shape != (batch,):
        raise ConfigError(f"expected {batch} levels, got shape {tuple(level.shape)}")
    if bool(((level <= 0) | (level > 1)).any()):
        raise ConfigError("noise levels must lie in (0, 1]")
    return level


def as_class_tensor(
    z: ClassLike,
    batch: int,
    device: torch.device = torch.device("cpu"),
    n_classes: int = len(ARTIFACT_CLASSES),
) -> torch.Tensor:
    if isinstance(z, torch.Tensor):
        z = z.to(device=device, dtype=torch.long)
        if z.dim() == 0:
            z = z.expand(batch)
    elif isinstance(z, int):
        z = torch.full((batch,), z, dtype=torch.long, device=device)
    else:
        z = torch.full((batch,), class_index(z), dtype=torch.long, device=device)
    if z.shape != (batch,):
        raise ConfigError(f"expected {batch} class labels, got shape {tuple(z.shape)}")
    if bool(((z < 0) | (z >= n_classes)).any()):
        raise ConfigError(f"class indices must lie in 0..{n_classes - 1}")
    return z


#####################################
# Operations
#####################################


def init_params(cfg: DenoiserConfig, seed: int) -> DualPathDenoiser:
    """Build a freshly initialized network; bit-identical for the same (cfg, seed)."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = DualPathDenoiser(cfg)
        model.reset_parameters()
    return model


def film(params: DualPathDenoiser, level: LevelLike, z: ClassLike) -> list[tuple[torch.Tensor, torch.Tensor]]:
    """Per-site (gamma, xi) for a single (level, class) pair."""
    like = next(params.parameters())
    with torch.no_grad():
        level_t = as_level_tensor(level, 1, like)
        z_t = as_class_tensor(z, 1, like.device, params.cfg.n_classes)
        return [(gamma[0], xi[0]) for gamma, xi in params.film_params(level_t, z_t)]


def forward(params: DualPathDenoiser, x_t: torch.Tensor, y: torch.Tensor, level: LevelLike, z: ClassLike) -> torch.Tensor:
    """Gradient-free forward pass."""
    with torch.no_grad():
        return params(x_t, y, level, z)


@dataclass(frozen=True)
class TrainingBatch:
    """Stacked (x_t, y, level, z, eps_target) items; signals are (B, N)."""

    x_t: torch.Tensor
    y: torch.Tensor
    level: torch.Tensor
    z: torch.Tensor
    eps: torch.Tensor

    def __len__(self) -> int:
        return int(self.x_t.shape[0])


def l1_loss(params: DualPathDenoiser, batch: TrainingBatch) -> torch.Tensor:
    """Mean absolute error between eps_target and the prediction."""
    if len(batch) == 0:
        raise ConfigError("loss needs a nonempty batch")
    return F.l1_loss(params(batch.x_t, batch.y, batch.level, batch.z), batch.eps)


def loss_and_grad(params: DualPathDenoiser, batch: TrainingBatch) -> tuple[float, dict[str, torch.Tensor]]:
    """
    L1 loss and its exact gradient with respect to every parameter.

    The subgradient of |r| at r = 0 is taken as 0.
    """
    names, tensors = zip(*params.named_parameters())
    loss = l1_loss(params, batch)
    grads = torch.autograd.grad(loss, tensors, allow_unused=True)
    return float(loss.detach()), {
        name: torch.zeros_like(tensor) if grad is None else grad
        for name, tensor, grad in zip(names, tensors, grads)
    }

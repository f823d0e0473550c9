"""
sampler.py - joint posterior diffusion sampling and the single-branch ablation sampler.

Each reverse step t = T..1 of joint_sample:
    1. both denoisers predict eps for their branch (x_t or x_t', conditioned on y)
    2. invert to x0 and x0'
    3. split the measurement residual r = y - (x0 + lambda_snr x0') by lambda_dc
    4. take the DDPM posterior mean of each branch and add sigma_t * eta

An epsilon predictor is any callable (x_t, y, level, z) -> eps_hat on (B, N)
tensors; DualPathDenoiser and oracle.GaussianEpsPredictor both qualify.
"""

#####################################
# Import Modules
#####################################

# Import packages from Python Standard Library
import math
from dataclasses import dataclass
from typing import Callable, Optional

# Import external packages
import numpy as np
import torch

# Import functions from local modules
from d4pm.denoiser import as_class_tensor
from d4pm.errors import ConfigError, SamplingError
from d4pm.schedule import NoiseSchedule, inference_level, level_bounds
from utils.utils_logger import logger

EpsPredictor = Callable[[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor], torch.Tensor]

X0_FORMULAS = ("standard", "legacy")

#####################################
# Configuration
#####################################


@dataclass(frozen=True)
class SamplerConfig:
    lambda_dc: float = 0.5
    lambda_snr: float = 1.0
    share_eta: bool = True
    stochastic_level: bool = False
    x0_formula: str = "standard"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.lambda_dc <= 1.0:
            raise ConfigError(f"lambda_dc must lie in [0, 1], got {self.lambda_dc}")
        if not self.lambda_snr > 0.0:
            raise ConfigError(f"lambda_snr must be > 0, got {self.lambda_snr}")
        if self.x0_formula not in X0_FORMULAS:
            raise ConfigError(f"x0_formula must be one of {X0_FORMULAS}, got {self.x0_formula!r}")


@dataclass(frozen=True)
class StepState:
    """Per-step quantities of the joint sampler; tensors are (B, N)."""

    step: int
    level: float
    x_t: torch.Tensor
    x_t_prime: torch.Tensor
    x0_hat: torch.Tensor
    x0p_hat: torch.Tensor
    residual: torch.Tensor
    mu: torch.Tensor
    mu_prime: torch.Tensor
    corrected_residual: torch.Tensor


def _mean_norm(values: torch.Tensor) -> float:
    return float(torch.linalg.vector_norm(values, dim=-1).mean())


def trace_record(state: StepState) -> dict:
    """Diagnostics row for one step (batch-mean norms)."""
    return {
        "step": state.step,
        "level": state.level,
        "residual_norm": _mean_norm(state.residual),
        "corrected_residual_norm": _mean_norm(state.corrected_residual),
        "x0_norm": _mean_norm(state.x0_hat),
        "x0p_norm": _mean_norm(state.x0p_hat),
    }


#####################################
# Step Operations
#####################################


def predict_x0(s: NoiseSchedule, t: int, x_t, eps_hat):
    """Standard DDPM inversion x0 = (x_t - sqrt(1 - abar_t) eps_hat) / sqrt(abar_t)."""
    abar = s.alpha_bar_at(t)
    return (x_t - math.sqrt(1.0 - abar) * eps_hat) / math.sqrt(abar)


def predict_x0_legacy(s: NoiseSchedule, t: int, x_t, eps_hat, artifact_branch: bool):
    """
    Alternative inversions selected with x0_formula="legacy".

    The clean-signal line divides the noise term by sqrt(abar_t); the artifact
    line uses the posterior-mean coefficient (1 - alpha_t) / sqrt(1 - abar_t).
    """
    abar, alpha = s.alpha_bar_at(t), s.alpha_at(t)
    if artifact_branch:
        coef = (1.0 - alpha) / math.sqrt(1.0 - abar)
    else:
        coef = math.sqrt(1.0 - abar) / math.sqrt(abar)
    return (x_t - coef * eps_hat) / math.sqrt(alpha)


def consistency_step(x0, x0p, y, cfg: SamplerConfig):
    """
    Split the measurement residual between the branches.

    r = y - (x0 + lambda_snr x0'); x0_hat = x0 + lambda_dc r; x0p_hat = x0' + (1 - lambda_dc) r.
    """
    r = y - (x0 + x0p * cfg.lambda_snr)
    return x0 + cfg.lambda_dc * r, x0p + (1.0 - cfg.lambda_dc) * r, r


def posterior_coefficients(s: NoiseSchedule, t: int) -> tuple[float, float]:
    """Weights of (x0_hat, x_t) in the DDPM posterior mean at step t."""
    abar, abar_prev = s.alpha_bar_at(t), s.alpha_bar_at(t - 1)
    beta, alpha = s.beta_at(t), s.alpha_at(t)
    return beta * math.sqrt(abar_prev) / (1.0 - abar), (1.0 - abar_prev) * math.sqrt(alpha) / (1.0 - abar)


def posterior_mean(s: NoiseSchedule, t: int, x0_hat, x_t):
    """mu_t = [beta_t sqrt(abar_{t-1}) / (1 - abar_t)] x0_hat + [(1 - abar_{t-1}) sqrt(alpha_t) / (1 - abar_t)] x_t."""
    c0, ct = posterior_coefficients(s, t)
    return c0 * x0_hat + ct * x_t


#####################################
# Sampling Loops
#####################################


def _as_batch(y) -> tuple[torch.Tensor, bool]:
    y = torch.as_tensor(y)
    if not torch.is_floating_point(y):
        y = y.to(torch.float64)
    squeeze = y.dim() == 1
    y = y[None, :] if squeeze else y
    if y.dim() != 2:
        raise ConfigError(f"y must be (N,) or (B, N), got shape {tuple(y.shape)}")
    if not torch.isfinite(y).all():
        raise ConfigError("measurement y contains non-finite values")
    return y, squeeze


def _level_tensor(s: NoiseSchedule, t: int, cfg: SamplerConfig, batch: int, like: torch.Tensor, gen: torch.Generator) -> torch.Tensor:
    if cfg.stochastic_level:
        low, high = level_bounds(s, t)
        u = torch.rand(batch, generator=gen, dtype=like.dtype)
        return low + (high - low) * u
    return torch.full((batch,), inference_level(s, t).value, dtype=like.dtype)


def _check_finite(t: int, **tensors: torch.Tensor) -> None:
    for what, value in tensors.items():
        if not torch.isfinite(value).all():
            logger.error(f"Non-finite {what} at step {t}")
            raise SamplingError(t, what)


def _draw(gen: torch.Generator, like: torch.Tensor, noiseless: bool) -> torch.Tensor:
    if noiseless:
        return torch.zeros_like(like)
    return torch.randn(like.shape, generator=gen, dtype=like.dtype)


def _invert(s, t, x_t, eps_hat, cfg: SamplerConfig, artifact_branch: bool):
    if cfg.x0_formula == "legacy":
        return predict_x0_legacy(s, t, x_t, eps_hat, artifact_branch)
    return predict_x0(s, t, x_t, eps_hat)


def joint_sample(
    eps_eeg: EpsPredictor,
    eps_art: EpsPredictor,
    y,
    z,
    s: NoiseSchedule,
    cfg: SamplerConfig,
    rng: Optional[torch.Generator] = None,
    trace: Optional[list] = None,
    noiseless: bool = False,
) -> tuple[torch.Tensor, torch.Tensor]:
    """
    Paired reverse diffusion with data-consistency correction.

    Args:
        eps_eeg, eps_art: Epsilon predictors of the clean-signal and artifact branches.
        y: Measurement, (N,) or (B, N).
        z: Artifact class (label or (B,) indices).
        s: Noise schedule.
        cfg: Sampler settings.
        rng: torch.Generator; seeded from cfg.seed when omitted.
        trace: Optional list receiving one diagnostics dict per step.
        noiseless: Replace x_T, x_T' and every eta by zeros (mean trajectory).

    Returns:
        (clean estimate, artifact estimate), the corrected x0 predictions at t = 1.
    """
    y, squeeze = _as_batch(y)
    gen = rng if rng is not None else seeded_generator(cfg.seed)
    z = as_class_tensor(z, y.shape[0], y.device)

    x_t = _draw(gen, y, noiseless)
    x_tp = _draw(gen, y, noiseless)
    x0_hat = x0p_hat = None
    with torch.no_grad():
        for t in range(s.T, 0, -1):
            if t > 1:
                eta = _draw(gen, y, noiseless)
                eta_p = eta if cfg.share_eta else _draw(gen, y, noiseless)
            else:
                eta = eta_p = torch.zeros_like(y)
            level = _level_tensor(s, t, cfg, y.shape[0], y, gen)

            x0 = _invert(s, t, x_t, eps_eeg(x_t, y, level, z), cfg, artifact_branch=False)
            x0p = _invert(s, t, x_tp, eps_art(x_tp, y, level, z), cfg, artifact_branch=True)
            x0_hat, x0p_hat, r = consistency_step(x0, x0p, y, cfg)
            mu = posterior_mean(s, t, x0_hat, x_t)
            mu_p = posterior_mean(s, t, x0p_hat, x_tp)
            _check_finite(t, x0_hat=x0_hat, x0p_hat=x0p_hat, mu=mu, mu_prime=mu_p)

            if trace is not None:
                corrected = y - (x0_hat + x0p_hat * cfg.lambda_snr)
                trace.append(
                    trace_record(StepState(t, float(level[0]), x_t, x_tp, x0_hat, x0p_hat, r, mu, mu_p, corrected))
                )
            sigma = s.sigma_at(t)
            x_t = mu + sigma * eta
            x_tp = mu_p + sigma * eta_p
            logger.debug(f"joint step t={t} |r|={_mean_norm(r):.4g}")

    if squeeze:
        return x0_hat[0], x0p_hat[0]
    return x0_hat, x0p_hat


def single_branch_sample(
    eps_eeg: EpsPredictor,
    y,
    z,
    s: NoiseSchedule,
    cfg: SamplerConfig,
    rng: Optional[torch.Generator] = None,
    trace: Optional[list] = None,
    noiseless: bool = False,
) -> torch.Tensor:
    """Conditional DDPM reverse process on the clean-signal branch alone (no consistency step)."""
    y, squeeze = _as_batch(y)
    gen = rng if rng is not None else seeded_generator(cfg.seed)
    z = as_class_tensor(z, y.shape[0], y.device)

    x_t = _draw(gen, y, noiseless)
    x0 = None
    with torch.no_grad():
        for t in range(s.T, 0, -1):
            eta = _draw(gen, y, noiseless) if t > 1 else torch.zeros_like(y)
            level = _level_tensor(s, t, cfg, y.shape[0], y, gen)
            x0 = _invert(s, t, x_t, eps_eeg(x_t, y, level, z), cfg, artifact_branch=False)
            mu = posterior_mean(s, t, x0, x_t)
            _check_finite(t, x0=x0, mu=mu)
            if trace is not None:
                r = y - x0
                trace.append(
                    {
                        "step": t,
                        "level": float(level[0]),
                        "residual_norm": _mean_norm(r),
                        "corrected_residual_norm": _mean_norm(r),
                        "x0_norm": _mean_norm(x0),
                        "x0p_norm": 0.0,
                    }
                )
            x_t = mu + s.sigma_at(t) * eta

    return x0[0] if squeeze else x0


def seeded_generator(seed: int) -> torch.Generator:
    """torch.Generator seeded for one sampling run."""
    return torch.Generator().manual_seed(int(seed))


def to_numpy(values: torch.Tensor) -> np.ndarray:
    return values.detach().cpu().numpy().astype(np.float64)

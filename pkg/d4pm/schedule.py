"""
schedule.py - diffusion noise schedule and continuous noise-level conditioning.

Steps are 1-indexed (t = 1..T) in every public function; the arrays stored on
NoiseSchedule are 0-indexed, so beta[t - 1] is beta_t. alpha_bar at t = 0 is 1.
"""

#####################################
# Import Modules
#####################################

# Import packages from Python Standard Library
import math
from dataclasses import dataclass, field

# Import external packages
import numpy as np

# Import functions from local modules
from d4pm.errors import ConfigError

#####################################
# Domain Types
#####################################


@dataclass(frozen=True)
class NoiseSchedule:
    """Linear beta schedule with its derived alpha and alpha_bar tables."""

    T: int
    beta_start: float
    beta_end: float
    beta: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    alpha_bar: np.ndarray = field(repr=False)

    def check_step(self, t: int) -> None:
        if not 1 <= int(t) <= self.T:
            raise ConfigError(f"step t={t} outside 1..{self.T}")

    def alpha_bar_at(self, t: int) -> float:
        """alpha_bar_t with the alpha_bar_0 = 1 convention."""
        if t == 0:
            return 1.0
        self.check_step(t)
        return float(self.alpha_bar[t - 1])

    def beta_at(self, t: int) -> float:
        self.check_step(t)
        return float(self.beta[t - 1])

    def alpha_at(self, t: int) -> float:
        self.check_step(t)
        return float(self.alpha[t - 1])

    def sigma_at(self, t: int) -> float:
        """Posterior standard deviation sqrt(beta_t (1 - abar_{t-1}) / (1 - abar_t))."""
        abar = self.alpha_bar_at(t)
        abar_prev = self.alpha_bar_at(t - 1)
        return math.sqrt(self.beta_at(t) * (1.0 - abar_prev) / (1.0 - abar))

    def to_dict(self) -> dict:
        """Serializable parameters; the tables are rebuilt on load."""
        return {"T": self.T, "beta_start": self.beta_start, "beta_end": self.beta_end}

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseSchedule":
        return make_schedule(int(data["T"]), float(data["beta_start"]), float(data["beta_end"]))


@dataclass(frozen=True)
class ContinuousLevel:
    """Conditioning scalar sqrt(alpha_bar*) and the step it belongs to."""

    value: float
    step: int


#####################################
# Operations
#####################################


def make_schedule(T: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """
    Build a schedule with beta linearly interpolated from beta_start to beta_end.

    Args:
        T (int): Number of diffusion steps, >= 1.
        beta_start (float): First beta, in (0, 1).
        beta_end (float): Last beta, in [beta_start, 1).

    Returns:
        NoiseSchedule: Immutable schedule with alpha = 1 - beta and the
        running product alpha_bar.
    """
    if int(T) != T or T < 1:
        raise ConfigError(f"T must be a positive integer, got {T}")
    if not (0.0 < beta_start < 1.0 and 0.0 < beta_end < 1.0):
        raise ConfigError(f"beta bounds must lie in (0, 1), got {beta_start}, {beta_end}")
    if beta_start > beta_end:
        raise ConfigError(f"beta_start={beta_start} exceeds beta_end={beta_end}")

    beta = np.linspace(beta_start, beta_end, int(T), dtype=np.float64)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    for array in (beta, alpha, alpha_bar):
        array.setflags(write=False)
    return NoiseSchedule(
        T=int(T),
        beta_start=float(beta_start),
        beta_end=float(beta_end),
        beta=beta,
        alpha=alpha,
        alpha_bar=alpha_bar,
    )


def level_bounds(s: NoiseSchedule, t: int) -> tuple[float, float]:
    """Interval [sqrt(abar_t), sqrt(abar_{t-1})] the continuous level lives in."""
    s.check_step(t)
    return math.sqrt(s.alpha_bar_at(t)), math.sqrt(s.alpha_bar_at(t - 1))


def sample_continuous_level(s: NoiseSchedule, t: int, rng: np.random.Generator) -> ContinuousLevel:
    """Draw sqrt(alpha_bar*) uniformly between sqrt(abar_t) and sqrt(abar_{t-1})."""
    low, high = level_bounds(s, t)
    return ContinuousLevel(value=float(rng.uniform(low, high)), step=int(t))


def sample_continuous_levels(s: NoiseSchedule, t: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vectorized sample_continuous_level for an array of steps."""
    t = np.asarray(t, dtype=np.int64)
    if t.size and (t.min() < 1 or t.max() > s.T):
        raise ConfigError(f"steps must lie in 1..{s.T}")
    abar_ext = np.concatenate(([1.0], s.alpha_bar))
    low = np.sqrt(abar_ext[t])
    high = np.sqrt(abar_ext[t - 1])
    return rng.uniform(low, high)


def inference_level(s: NoiseSchedule, t: int) -> ContinuousLevel:
    """Deterministic conditioning level sqrt(abar_t) used during sampling."""
    s.check_step(t)
    return ContinuousLevel(value=math.sqrt(s.alpha_bar_at(t)), step=int(t))

"""
conftest.py - shared fixtures for the d4pm test suite.
"""

# Import external packages
import numpy as np
import pytest
import torch

# Import functions from local modules
from d4pm.denoiser import DenoiserConfig
from d4pm.schedule import make_schedule
from d4pm.signals import SynthConfig, synthesize


@pytest.fixture
def schedule():
    """Desk schedule: T=50, beta from 1e-4 to 5e-2."""
    return make_schedule(50, 1e-4, 5e-2)


@pytest.fixture
def short_schedule():
    return make_schedule(10, 1e-3, 0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_denoiser_cfg():
    return DenoiserConfig(n=16, channels=8, encoder_blocks=1, heads=4, film_embed_dim=8)


@pytest.fixture(scope="session")
def tiny_split():
    """Small mixed dataset of length-16 segments: 12 clean, 6 per artifact class."""
    cfg = SynthConfig(n=16, clean_count=12, eog_count=6, emg_count=6, ecg_count=6, seed=7)
    _, split = synthesize(cfg)
    return split


def perturb_parameters(model: torch.nn.Module, seed: int, scale: float = 0.1) -> None:
    """Add seeded noise to every parameter so zero-initialized heads become active."""
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for p in model.parameters():
            p.add_(scale * torch.randn(p.shape, generator=gen, dtype=p.dtype))


@pytest.fixture
def perturb():
    return perturb_parameters

"""
d4pm - dual-branch conditional diffusion for single-channel artifact removal.

Modules:
- schedule: noise schedule and continuous noise level
- signals: segments, SNR-controlled mixing, synthetic generators, file I/O
- denoiser: dual-path FiLM epsilon-prediction network
- trainer: forward-process examples, Adam training, checkpoints
- sampler: joint posterior sampling and the single-branch ablation sampler
- oracle: closed-form Gaussian denoisers and posteriors
- metrics: RRMSE_t, RRMSE_s, CC (+ p-value), output SNR and reports
- cli: command-line entry point (python -m d4pm.cli)
"""

__version__ = "0.1.0"

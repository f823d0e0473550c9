"""
utils_config.py - common configuration getters used by the d4pm commands.

Settings are resolved in this order:
    command-line flag > config file (flat KEY=value) > environment (D4PM_*) > default

The environment is loaded from a .env file in the project root when present.
"""

#####################################
# Import Modules
#####################################

# Import packages from Python Standard Library
import os
import pathlib
from typing import Any, Callable, Mapping, Optional

# Import external packages
from dotenv import dotenv_values, load_dotenv

# Import functions from local modules
from d4pm.errors import ConfigError
from utils.utils_logger import logger

#####################################
# Load Environment Variables
#####################################

load_dotenv()

#####################################
# Default Configurations
#####################################

ENV_PREFIX = "D4PM_"

# Desk-scale defaults; every key can be overridden by flag, config file or env.
DEFAULT_SETTINGS: dict[str, Any] = {
    "seed": 0,
    "n": 64,
    "steps": 50,
    "beta_start": 1e-4,
    "beta_end": 5e-2,
    "lambda_dc": 0.5,
    "lambda_snr": 1.0,
    "epochs": 30,
    "batch_size": 32,
    "lr": 1e-3,
    "channels": 16,
    "encoder_blocks": 1,
    "heads": 4,
    "film_embed_dim": 32,
    "sample_rate": 64.0,
    "out": "data",
    "dataset": "data",
}

#####################################
# Getter Functions for .env Variables
#####################################


def get_thread_cap() -> Optional[int]:
    """Fetch the D4PM_THREADS parallelism cap from environment, if any."""
    raw = os.getenv(f"{ENV_PREFIX}THREADS")
    if raw is None or not raw.strip():
        return None
    try:
        threads = int(raw)
    except ValueError as e:
        raise ConfigError(f"{ENV_PREFIX}THREADS must be an integer, got {raw!r}") from e
    if threads < 1:
        raise ConfigError(f"{ENV_PREFIX}THREADS must be >= 1, got {threads}")
    logger.info(f"Thread cap: {threads}")
    return threads


def apply_thread_cap() -> None:
    """Cap torch intra-op parallelism when D4PM_THREADS is set."""
    threads = get_thread_cap()
    if threads is not None:
        import torch

        torch.set_num_threads(threads)


#####################################
# Config File and Resolution
#####################################


def load_config_file(path: Optional[str]) -> dict[str, str]:
    """
    Read a flat KEY=value config file.

    Keys are normalized to lower case with '-' replaced by '_', so
    `lambda-dc=0.3` and `LAMBDA_DC=0.3` both set `lambda_dc`.

    Args:
        path (str | None): Config file path; None means no config file.

    Returns:
        dict: Raw string values keyed by normalized name.
    """
    if path is None:
        return {}
    config_path = pathlib.Path(path)
    if not config_path.is_file():
        raise ConfigError(f"config file not found: {config_path}")
    raw = dotenv_values(config_path)
    values = {
        key.strip().lower().replace("-", "_"): value
        for key, value in raw.items()
        if value is not None
    }
    unknown = sorted(set(values) - set(DEFAULT_SETTINGS))
    if unknown:
        logger.warning(f"Ignoring unknown config keys in {config_path}: {unknown}")
    logger.info(f"Loaded {len(values)} settings from {config_path}")
    return values


def resolve_setting(
    key: str,
    flag_value: Any,
    file_values: Mapping[str, str],
    cast: Callable[[str], Any] = str,
) -> Any:
    """
    Resolve one setting using flag > config file > environment > default.

    Args:
        key (str): Setting name as it appears in DEFAULT_SETTINGS.
        flag_value: Value parsed from the command line, None when not given.
        file_values (Mapping): Values from load_config_file.
        cast (callable): Converter applied to string sources.

    Returns:
        The resolved, typed value.
    """
    if flag_value is not None:
        return flag_value
    source, raw = None, None
    if key in file_values:
        source, raw = "config file", file_values[key]
    elif os.getenv(ENV_PREFIX + key.upper()) is not None:
        source, raw = "environment", os.getenv(ENV_PREFIX + key.upper())
    if raw is None:
        return DEFAULT_SETTINGS[key]
    try:
        value = cast(raw)
    except ValueError as e:
        raise ConfigError(f"invalid value for {key} from {source}: {raw!r}") from e
    logger.debug(f"Setting {key}={value!r} from {source}")
    return value

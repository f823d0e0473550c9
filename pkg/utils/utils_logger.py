"""
Logger Setup Script
File: utils/utils_logger.py

This script provides logging functions for the project.
Every d4pm module imports `logger` from here.

Features:
- Logs information, warnings, and errors to a rotating log file and stderr.
- Ensures the log directory exists.
- Sanitizes logs to remove personal/identifying information for sharing runs.
- Level and folder come from D4PM_LOG_LEVEL and D4PM_LOG_DIR.
"""

#####################################
# Import Modules
#####################################

# Imports from Python Standard Library
import getpass
import os
import pathlib
import sys
from typing import Any, Mapping

# Imports from external packages
from dotenv import load_dotenv
from loguru import logger

#####################################
# Default Configurations
#####################################

load_dotenv()

# Set directory where logs will be stored
LOG_FOLDER: pathlib.Path = pathlib.Path(os.getenv("D4PM_LOG_DIR", "logs"))

# Set the name of the log file
LOG_FILE: pathlib.Path = LOG_FOLDER.joinpath("d4pm.log")

LOG_LEVEL: str = os.getenv("D4PM_LOG_LEVEL", "INFO").upper()

#####################################
# Helper Functions
#####################################


def sanitize_message(record: Mapping[str, Any]) -> str:
    """Remove personal/identifying information from log messages and escape braces."""
    message = record["message"]

    # Replace username with generic placeholder
    try:
        current_user = getpass.getuser()
        message = message.replace(current_user, "USER")
    except Exception:
        pass

    # Replace absolute paths with relative ones before the home directory,
    # the project usually lives below home
    try:
        cwd = str(pathlib.Path.cwd())
        message = message.replace(cwd, "PROJECT_ROOT")
    except Exception:
        pass

    try:
        home_path = str(pathlib.Path.home())
        message = message.replace(home_path, "~")
    except Exception:
        pass

    message = message.replace("\\", "/")

    # Escape braces so Loguru's string formatter won't treat them as fields
    message = message.replace("{", "{{").replace("}", "}}")

    return message


def format_sanitized(record: Mapping[str, Any]) -> str:
    """Custom formatter that sanitizes messages and returns a plain string."""
    message = sanitize_message(record)
    time_str = record["time"].strftime("%Y-%m-%d %H:%M:%S")
    level_name = record["level"].name
    return f"{time_str} | {level_name} | {record['name']} | {message}\n"


try:
    LOG_FOLDER.mkdir(parents=True, exist_ok=True)
except Exception as e:
    sys.stderr.write(f"Error creating log folder: {e}\n")

try:
    logger.remove()
    logger.add(
        LOG_FILE,
        level=LOG_LEVEL,
        rotation="500 kB",
        retention=1,
        compression=None,
        enqueue=True,  # safer across threads/processes
        format=format_sanitized,
    )
    logger.add(
        sys.stderr,
        level=LOG_LEVEL,
        enqueue=True,
        format=format_sanitized,
    )
    logger.debug(f"Logging to file: {LOG_FILE}")
except Exception as e:
    logger.error(f"Error configuring logger to write to file: {e}")

"""
Conducta Settings
=================

Run-time configuration and logging. Values come from environment variables,
optionally loaded from a .env file next to the scripts (python-dotenv).

Recognised variables:
    CONDUCTA_THREADS               worker cap for assembly and experiment fan-out
    CONDUCTA_LOG_FILE              rotating log path (default: conducta.log)
    CONDUCTA_LOG_LEVEL             root log level (default: INFO)
    CONDUCTA_RESONANCE_THRESHOLD   condition number treated as resonance (default: 1e12)
"""

import logging
import logging.handlers
import os
import sys
from dataclasses import dataclass

from dotenv import load_dotenv

ROOT_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

LOG_MAX_BYTES = 5 * 1024 * 1024   # 5 MB per file
LOG_BACKUP_COUNT = 3               # keep conducta.log + 3 rotated backups
LOG_FORMAT = "%(asctime)s [%(levelname)s] %(message)s"
LOG_DATEFMT = "%Y-%m-%d %H:%M:%S"

DEFAULT_RESONANCE_THRESHOLD = 1e12


@dataclass(frozen=True)
class Settings:
    threads: int
    log_file: str
    log_level: str
    resonance_threshold: float


def load_settings(env_file=None):
    """Read settings from the environment (after loading .env if present)."""
    load_dotenv(env_file or os.path.join(ROOT_DIR, ".env"))

    threads = os.getenv("CONDUCTA_THREADS")
    threads = max(1, int(threads)) if threads else (os.cpu_count() or 1)

    return Settings(
        threads=threads,
        log_file=os.getenv("CONDUCTA_LOG_FILE", os.path.join(ROOT_DIR, "conducta.log")),
        log_level=os.getenv("CONDUCTA_LOG_LEVEL", "INFO").upper(),
        resonance_threshold=float(
            os.getenv("CONDUCTA_RESONANCE_THRESHOLD", str(DEFAULT_RESONANCE_THRESHOLD))
        ),
    )


def setup_logging(settings, to_file=True):
    """
    Configure the root logger once: stderr stream plus a rotating file.
    stdout is reserved for command payloads (JSON reports).
    """
    fmt = logging.Formatter(fmt=LOG_FORMAT, datefmt=LOG_DATEFMT)
    root = logging.getLogger()
    root.setLevel(getattr(logging, settings.log_level, logging.INFO))

    for handler in list(root.handlers):
        if getattr(handler, "_conducta", False):
            root.removeHandler(handler)
            handler.close()

    stream = logging.StreamHandler(sys.stderr)
    stream.setFormatter(fmt)
    stream._conducta = True
    root.addHandler(stream)

    if to_file:
        try:
            fh = logging.handlers.RotatingFileHandler(
                settings.log_file, maxBytes=LOG_MAX_BYTES, backupCount=LOG_BACKUP_COUNT
            )
        except OSError as e:
            root.warning("Cannot open log file %s: %s", settings.log_file, e)
        else:
            fh.setFormatter(fmt)
            fh._conducta = True
            root.addHandler(fh)

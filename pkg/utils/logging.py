"""Script for logging."""

import logging
import sys
from pathlib import Path

ROOT_LOGGER = "dimerlab"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def _root() -> logging.Logger:
    root = logging.getLogger(ROOT_LOGGER)

    if not root.handlers:
        console_handler = logging.StreamHandler(sys.stdout)
        console_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(console_handler)
        root.setLevel(logging.INFO)

    root.propagate = False
    return root


def get_logger(name: str) -> logging.Logger:
    """Return a formatted logger.

    All loggers hang below a single `dimerlab` parent, so one call to
    `add_file_handler` or `set_level` reaches every module.

    Args:
        name: Name of the logger, usually the module `__name__`.

    Returns:
        Configured logger instance.

    """
    _root()
    return logging.getLogger(f"{ROOT_LOGGER}.{name}")


def set_level(level: int | str) -> None:
    """Change the verbosity of every dimerlab logger.

    Args:
        level: A `logging` level or its name, e.g. "DEBUG".
    """
    _root().setLevel(level)


def add_file_handler(path: Path) -> logging.Handler:
    """Mirror all dimerlab log lines into a file.

    Args:
        path: Log file, appended to if it already exists.

    Returns:
        The attached handler, so callers can detach it again.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    file_handler = logging.FileHandler(path, encoding="utf-8")
    file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
    _root().addHandler(file_handler)
    return file_handler


def remove_handler(handler: logging.Handler) -> None:
    _root().removeHandler(handler)
    handler.close()

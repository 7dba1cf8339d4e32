"""
Logging configuration for the solver.

Console records go to stderr so that CLI reports and CSV written to stdout
stay clean. A run can additionally mirror its records into a plain-text log
file next to its artifacts.
"""
import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Union

from config import Config

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'


class ColoredFormatter(logging.Formatter):
    """Level-coloured formatter; colours only when writing to a terminal."""

    COLORS = {
        'DEBUG': '\033[36m',
        'INFO': '\033[32m',
        'WARNING': '\033[33m',
        'ERROR': '\033[31m',
        'CRITICAL': '\033[35m',
    }
    RESET = '\033[0m'

    def __init__(self, fmt: str, datefmt: str, use_color: bool = True):
        super().__init__(fmt, datefmt=datefmt)
        self.use_color = use_color

    def format(self, record: logging.LogRecord) -> str:
        if not self.use_color:
            return super().format(record)
        color = self.COLORS.get(record.levelname, self.RESET)
        # copy so other handlers see the plain level name
        record = logging.makeLogRecord(record.__dict__)
        record.levelname = f"{color}{record.levelname}{self.RESET}"
        return super().format(record)


def setup_logger(name: str, level: int = logging.INFO) -> logging.Logger:
    """
    Set up a logger with one console handler on stderr.

    Args:
        name: Logger name
        level: Logging level

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)
    logger.setLevel(level)

    if logger.handlers:
        return logger

    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(level)
    handler.setFormatter(ColoredFormatter(LOG_FORMAT, DATE_FORMAT, use_color=sys.stderr.isatty()))

    logger.addHandler(handler)
    return logger


def set_level(level: str) -> None:
    """Change the level of the application logger and its handlers (CLI --log-level)."""
    numeric = logging.getLevelName(level.upper())
    app_logger.setLevel(numeric)
    for handler in app_logger.handlers:
        handler.setLevel(numeric)


@contextmanager
def run_log(path: Union[str, Path]) -> Iterator[Path]:
    """
    Mirror application records into a plain-text file for the duration of a run.

    The file handler follows the logger level, so --log-level DEBUG also
    records Newton iterations in the file.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(path, mode="w", encoding="utf-8")
    handler.setLevel(app_logger.level)
    handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT))
    app_logger.addHandler(handler)
    try:
        yield path
    finally:
        app_logger.removeHandler(handler)
        handler.close()


app_logger = setup_logger("polyvem", logging.getLevelName(Config.LOG_LEVEL))

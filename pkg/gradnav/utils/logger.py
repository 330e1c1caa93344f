"""
Logging utilities for the package.
"""
import logging
import sys
from typing import Optional

DEFAULT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logger(
    name: str,
    level: Optional[str] = "INFO",
    format_string: Optional[str] = None
) -> logging.Logger:
    """
    Set up a logger with the specified configuration.

    Calling it again for the same name updates the level of the existing
    handler instead of adding a second one.

    Args:
        name: Logger name
        level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        format_string: Custom format string for log messages

    Returns:
        Configured logger instance

    Raises:
        ValueError: If the level name is unknown
    """
    if format_string is None:
        format_string = DEFAULT_FORMAT

    numeric = getattr(logging, (level or "INFO").upper(), None)
    if not isinstance(numeric, int):
        raise ValueError(f"Unknown log level: {level}")

    logger = logging.getLogger(name)
    logger.setLevel(numeric)

    if not logger.handlers:
        handler = logging.StreamHandler(sys.stdout)
        handler.setFormatter(logging.Formatter(format_string))
        logger.addHandler(handler)
    for handler in logger.handlers:
        handler.setLevel(numeric)

    return logger


# Package logger; modules log through logging.getLogger(__name__) beneath it
logger = setup_logger("gradnav")

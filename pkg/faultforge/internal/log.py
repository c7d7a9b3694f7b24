# Copyright (c), CommunityLogiq Software

import os
import sys

from loguru import logger

LOG_LEVEL_ENV = "FAULTFORGE_LOG_LEVEL"
DEFAULT_LOG_LEVEL = "INFO"

_FORMAT = "<green>{time:HH:mm:ss.SSS}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan> - {message}"


def configure_logging(level: str | None = None):
    """Single stderr sink; flag, then FAULTFORGE_LOG_LEVEL, then INFO"""
    level = (level or os.getenv(LOG_LEVEL_ENV) or DEFAULT_LOG_LEVEL).upper()
    logger.remove()
    try:
        logger.add(sys.stderr, level=level, format=_FORMAT)
    except ValueError:
        logger.add(sys.stderr, level=DEFAULT_LOG_LEVEL, format=_FORMAT)
        logger.warning(f"Unknown log level {level!r}, using {DEFAULT_LOG_LEVEL}")

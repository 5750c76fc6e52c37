"""Root logging configuration for the command-line front end."""

import logging
import os
from typing import Optional

from ..config.constants import DEFAULT_LOG_LEVEL, LOG_ENV_VAR

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(verbose: bool = False, level: Optional[str] = None) -> int:
    """
    Configure the root logger once.

    The level comes from the argument, else from KM_LOG, else WARNING;
    ``verbose`` forces DEBUG.

    Returns:
        The numeric level applied
    """
    name = "DEBUG" if verbose else (level or os.environ.get(LOG_ENV_VAR, DEFAULT_LOG_LEVEL))
    numeric = logging.getLevelName(name.strip().upper())
    if not isinstance(numeric, int):
        numeric = logging.getLevelName(DEFAULT_LOG_LEVEL)
    logging.basicConfig(level=numeric, format=LOG_FORMAT, force=True)
    return numeric

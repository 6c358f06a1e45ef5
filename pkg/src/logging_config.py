# logging_config.py
"""
Logging setup for the toolkit.

All modules obtain their logger through ``get_logger(__name__)``. Loggers
live under the ``halfwave`` namespace and share one stderr handler.

Set HALFWAVE_LOG_LEVEL=DEBUG for solver progress, INFO for run-level
messages. The default is WARNING, which still shows quality flags.
"""

import logging
import os
import sys

_ROOT_NAME = "halfwave"
_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"
_configured = False


def _configure_root() -> logging.Logger:
    global _configured
    root = logging.getLogger(_ROOT_NAME)
    if not _configured:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(_FORMAT, datefmt="%H:%M:%S"))
        root.addHandler(handler)
        root.propagate = False
        level = os.environ.get("HALFWAVE_LOG_LEVEL", "WARNING").upper()
        root.setLevel(getattr(logging, level, logging.WARNING))
        _configured = True
    return root


def get_logger(name: str) -> logging.Logger:
    root = _configure_root()
    if name.startswith("src."):
        name = name[4:]
    return root.getChild(name)


def set_level(level: str) -> None:
    _configure_root().setLevel(getattr(logging, level.upper(), logging.WARNING))

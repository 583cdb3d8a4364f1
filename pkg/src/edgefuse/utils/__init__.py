"""
Utility modules for edgefuse.

Provides:
- logging: Logging setup with colored console output
- errors: Exception taxonomy with CLI exit codes
- formats: PFM/PNM readers and writers, calibration files, atomic writes
"""

from edgefuse.utils.errors import (
    ConfigMismatchError,
    EdgefuseError,
    InputError,
    NumericError,
    ParseError,
    ShapeError,
)
from edgefuse.utils.logging import get_logger, setup_logging

__all__ = [
    "get_logger",
    "setup_logging",
    "EdgefuseError",
    "ParseError",
    "ShapeError",
    "NumericError",
    "ConfigMismatchError",
    "InputError",
]

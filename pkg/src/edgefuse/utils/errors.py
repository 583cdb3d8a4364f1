"""
Exception taxonomy for edgefuse.

Every failure a subcommand can report maps to one exception class, and
each class carries the process exit code the CLI returns for it:

- ParseError (3): malformed file or config line
- ShapeError (4): dimension mismatch or indivisible size
- NumericError (5): NaN/Inf in losses or inputs
- ConfigMismatchError (6): model file disagrees with the architecture
- InputError (7): missing, unreadable or invalid inputs
"""

from __future__ import annotations

from pathlib import Path


class EdgefuseError(Exception):
    """Base class for all errors raised by edgefuse."""

    exit_code: int = 1


class ParseError(EdgefuseError):
    """A file or config line could not be parsed."""

    exit_code = 3

    def __init__(self, message: str, path: str | Path | None = None, line: int | None = None) -> None:
        """
        Initialize the parse error.

        Args:
            message: What is wrong with the input
            path: File at fault, if known
            line: 1-based line number at fault, if known
        """
        self.path = str(path) if path is not None else None
        self.line = line
        location = ""
        if self.path is not None:
            location = self.path if line is None else f"{self.path}:{line}"
            location += ": "
        super().__init__(f"{location}{message}")


class ShapeError(EdgefuseError):
    """Array dimensions do not fit the operation."""

    exit_code = 4


class NumericError(EdgefuseError):
    """A computation produced or received non-finite values."""

    exit_code = 5


class ConfigMismatchError(EdgefuseError):
    """Stored model parameters disagree with the requested architecture."""

    exit_code = 6


class InputError(EdgefuseError):
    """An input file is missing or its contents are unusable."""

    exit_code = 7

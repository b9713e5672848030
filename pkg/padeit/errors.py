"""Domain exceptions raised across the simulation pipeline."""

from __future__ import annotations

from typing import Optional


class PadEITError(Exception):
    """Base class for every error raised by the toolkit."""


class MeshParseError(PadEITError, ValueError):
    """Mesh file could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MeshValidationError(PadEITError, ValueError):
    """A Mesh invariant does not hold."""

    def __init__(self, invariant: str, detail: str = ""):
        self.invariant = invariant
        message = f"mesh invariant violated ({invariant})"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class ElectrodePlacementError(PadEITError, ValueError):
    """Grid points collide on one node or fall off the mesh surface."""


class RelocationExhaustedError(PadEITError, RuntimeError):
    """No collision-free relocation found within the retry budget."""


class SingularSystemError(PadEITError, RuntimeError):
    """The FEM stiffness system cannot be factorized."""


class DimensionMismatchError(PadEITError, ValueError):
    """Arrays or plans that must agree in size do not."""


class DegenerateInputError(PadEITError, ValueError):
    """Input is valid in shape but carries no usable signal."""


class OutOfDomainError(PadEITError, ValueError):
    """A requested point or plane lies outside the mesh."""


class UsageError(PadEITError, ValueError):
    """Command-line arguments are missing or malformed."""

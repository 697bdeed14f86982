"""Exception types shared across the library."""

from __future__ import annotations


class DimensionMismatchError(ValueError):
    """Operands do not have conformal shapes."""


class SingularDiagonalError(ArithmeticError):
    """A triangular solve hit a zero diagonal entry.

    ``index`` is the 0-based position of the offending diagonal element.
    """

    def __init__(self, index: int, message: str | None = None):
        self.index = index
        super().__init__(message or f"zero diagonal entry at index {index}")


class SingularShiftError(ArithmeticError):
    """One or more shifts produced a (numerically) singular system.

    ``failures`` is a list of ``(shift_index, pivot_index)`` pairs, both
    0-based.  All non-failing shifts in the batch have been completed; their
    results are untouched by the failures.
    """

    def __init__(self, failures: list[tuple[int, int]], message: str | None = None):
        self.failures = list(failures)
        ids = sorted({f[0] for f in self.failures})
        super().__init__(message or f"singular shifted system for shift index(es) {ids}")


class EigensolverError(RuntimeError):
    """The dense eigensolver failed or its input pencil was singular."""

"""Exception types shared across the package."""


class PercBoundError(Exception):
    """Base class for package errors."""


class UsageError(PercBoundError):
    """Invalid arguments or model/space combinations (CLI exit code 2)."""


class NonConvergenceError(PercBoundError):
    """A spectral computation failed to converge (CLI exit code 3)."""


class MemoryBudgetError(PercBoundError):
    """The matrix build exceeded its entry budget (CLI exit code 4)."""

    def __init__(self, message: str, row_index: int):
        super().__init__(message)
        self.row_index = row_index


class BudgetError(PercBoundError):
    """An oracle computation would exceed its time/space budget."""


class InternalInvariantError(PercBoundError):
    """An internal invariant was violated; indicates a programming error."""

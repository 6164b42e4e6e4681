"""Exception and warning hierarchy shared across the package.

Two error families matter to callers: :class:`ValidationError` for bad
inputs or violated preconditions (CLI exit code 1) and
:class:`NumericalError` for computations that degenerate at runtime
(CLI exit code 2).
"""

from __future__ import annotations


class CoherelabError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(CoherelabError):
    """Raised when inputs or declared preconditions are invalid."""


class NumericalError(CoherelabError):
    """Raised when a computation degenerates numerically."""


class IllConditionedWarning(RuntimeWarning):
    """Emitted when a linear solve's condition estimate exceeds the guard."""


class GridRefinementWarning(RuntimeWarning):
    """Emitted when doubling the grid density moves a supremum noticeably."""

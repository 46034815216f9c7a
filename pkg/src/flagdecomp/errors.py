"""Exception types shared across the package.

The CLI maps these onto exit codes: domain violations (bad hierarchy,
degenerate block, incompatible flag type) exit 2, numerical failures exit 3,
and plain input/parse errors (ValueError, OSError) exit 1.
"""


class FlagDecompError(Exception):
    """Base class for all package-specific errors."""


class HierarchyViolation(FlagDecompError):
    """A column hierarchy fails the strict-rank-increase requirement.

    ``level`` is the 0-based index of the offending level.
    """

    def __init__(self, message: str, level: int | None = None):
        super().__init__(message)
        self.level = level


class DegenerateBlock(FlagDecompError):
    """A block ran out of directions before the requested basis was extracted.

    Raised when a (deflated) block's numerical rank is smaller than the
    number of basis vectors the flag type asks it to contribute; this
    signals a mis-specified flag type rather than something to paper over
    with arbitrary orthogonal padding.
    """

    def __init__(self, message: str, level: int | None = None):
        super().__init__(message)
        self.level = level


class FlagTypeError(FlagDecompError, ValueError):
    """A flag type is malformed or incompatible with the data/hierarchy."""


class NumericalFailure(FlagDecompError):
    """An iterative numerical routine failed to converge."""

"""Exception types shared across the package."""


class ClicktomoError(Exception):
    """Base class for all package-specific errors."""


class TruncationError(ClicktomoError, ValueError):
    """The photon-number cutoff is too small for the requested state."""


class ResourceLimitError(ClicktomoError, ValueError):
    """A requested tensor or matrix would exceed the configured size cap."""


class GridMismatchError(ClicktomoError, ValueError):
    """Efficiency grids of two objects do not agree."""


class DegenerateSupportError(ClicktomoError, ArithmeticError):
    """EM update hit a pattern with zero model probability but nonzero data.

    Remedy: restart from a strictly positive initial distribution
    (the default uniform start never triggers this).
    """


class NumericalError(ClicktomoError, ArithmeticError):
    """Non-finite values appeared during iteration."""

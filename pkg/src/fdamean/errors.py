"""Exception types raised by fdamean.

Plain argument problems raise :class:`ValueError`; the classes here cover the
numerical and data failures callers may want to handle separately.
"""


class NumericalFailure(RuntimeError):
    """A numerical routine (root search, factorization) did not converge."""


class IllConditionedWindow(NumericalFailure):
    """The local design matrix at an evaluation point is (nearly) singular.

    Usually means the bandwidth is too small for the design; enlarge ``h``.
    """

    def __init__(self, message, x=None, min_eigenvalue=None):
        super().__init__(message)
        self.x = x
        self.min_eigenvalue = min_eigenvalue


class DegenerateWindow(IllConditionedWindow):
    """No design point carries kernel mass at the evaluation point."""


class NoValidBandwidth(RuntimeError):
    """Every candidate bandwidth failed."""


class InvalidData(ValueError):
    """Data violates a structural requirement (monotone axes, shapes, NA)."""


class DatasetParseError(ValueError):
    """Malformed dataset file; ``lineno`` is 1-based."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno

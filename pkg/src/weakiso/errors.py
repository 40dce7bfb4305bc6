"""Exception hierarchy shared by the library and the CLI.

The CLI maps these onto exit codes: ``SearchFailure`` -> 2,
``IntegrityError`` -> 3.
"""


class WeakIsoError(Exception):
    """Base class for all library errors."""


class SearchFailure(WeakIsoError):
    """A bounded search ran out of candidates before succeeding."""

    def __init__(self, message, stage=None, found=None):
        super().__init__(message)
        self.stage = stage
        self.found = found


class IntegrityError(WeakIsoError):
    """Two independent computations disagreed, or a certificate failed to verify."""

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload


class UnitsError(WeakIsoError, ValueError):
    """Raised for d_K in {-3, -4}, where O_K has units other than +-1."""


class UnsupportedCase(WeakIsoError):
    """The requested decision falls outside what the implemented theory covers."""

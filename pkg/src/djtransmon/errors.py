"""Exception hierarchy.

ValueError subclasses signal bad input or configuration (CLI exit code 2);
NumericError subclasses signal a computation that could not produce a
trustworthy number (CLI exit code 3).
"""


class ParameterError(ValueError):
    """A physical parameter is outside its allowed domain."""


class ConfigError(ValueError):
    """Inconsistent or insufficient configuration (truncation, windows, specs)."""


class NonHermitianError(ValueError):
    pass


class NumericError(RuntimeError):
    pass


class FitError(NumericError):
    """A least-squares fit failed; ``diagnostics`` holds optimizer state."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DegenerateFitError(FitError):
    pass


class DispersiveBreakdownError(NumericError):
    """Dispersive formulas are not applicable at this flux.

    Raised for small detunings and for hybridized (ambiguously labeled)
    states near avoided crossings.
    """

    def __init__(self, message, flux=None, reason=""):
        super().__init__(message)
        self.flux = flux
        self.reason = reason


class RootNotFoundError(NumericError):
    pass

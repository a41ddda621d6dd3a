"""Exception hierarchy shared by every module of the package."""


class EntropyLabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(EntropyLabError, ValueError):
    """Invalid grid, convention flag, scenario key or parameter."""


class AliasingError(EntropyLabError, ValueError):
    """A field carries energy above the spectral truncation in strict mode."""


class ConstraintError(EntropyLabError, ValueError):
    """The measure constraint ``∫ e^{-f} dV = V`` is violated.

    Attributes
    ----------
    defect : float
        ``∫ e^{-f} dV - V``.
    """

    def __init__(self, message, defect):
        super().__init__(message)
        self.defect = defect


class SolverError(EntropyLabError, RuntimeError):
    """A nonlinear solve did not converge or lost positivity.

    Attributes
    ----------
    diagnostics : dict
        Iteration trajectory and whatever else helps reproduce the failure.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class UnsupportedBackgroundError(EntropyLabError, ValueError):
    """The operation needs the round (Kähler-Einstein) background."""


class DegenerateDirectionError(EntropyLabError, ValueError):
    """A variation direction is degenerate or not admissible here."""


class StepRejectedError(SolverError):
    """A flow step was rejected too many times."""


class NoHarmonicFormError(DegenerateDirectionError):
    """A traceless harmonic (1,1)-form was requested where none exists."""

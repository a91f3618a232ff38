"""Exception hierarchy shared by all modules."""


class LatticeError(Exception):
    """Base class for every error raised by the package."""


class InputError(LatticeError, ValueError):
    """Malformed or incomplete input (missing samples, bad files, bad fields)."""


class DomainError(LatticeError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ConfigurationError(LatticeError, ValueError):
    """Inconsistent run configuration (duplicate betas, too small a box, ...)."""


class NumericalError(LatticeError, ArithmeticError):
    """A numerical procedure failed to converge or met a singular system."""


class DiagnosticError(LatticeError, RuntimeError):
    """An internal consistency check failed; signals an upstream bug."""

"""Exception hierarchy shared by all modules."""


class LocalizerError(Exception):
    pass


class ValidationError(LocalizerError, ValueError):
    """Malformed geometry or parameter specification."""


class ConfigError(LocalizerError, ValueError):
    """Missing or unknown configuration entries."""


class DomainError(LocalizerError, ValueError):
    """Input outside the domain of an operation (e.g. empty truncation window)."""


class SymmetryError(LocalizerError, ValueError):
    """A required symmetry (chirality, JPJ = 1 - P) is violated."""


class NumericalError(LocalizerError, ArithmeticError):
    pass


class GapClosedError(NumericalError):
    """No line-gap on the imaginary axis at the requested tolerance."""


class QuadratureError(NumericalError):
    """Routh-Hurwitz integral too far from an integer to be trusted."""


class AmbiguousTrackingError(NumericalError):
    """Eigenvalue tracking could not be disambiguated by refinement."""


class SeparationError(NumericalError):
    """Spectral subsets too close for a stable Sylvester solve."""


class RankError(NumericalError):
    """Numerical rank is ambiguous at the rank threshold."""

"""Exception hierarchy shared by all modules."""


class GQTransportError(Exception):
    """Base class for every error raised by the package."""


class DomainError(GQTransportError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DegenerateStateError(DomainError):
    """A state sits on a Dirac cone apex, where chirality is undefined."""


class StructuralError(GQTransportError, ValueError):
    """Inputs have incompatible shapes, grids or meshes."""


class SolvabilityError(GQTransportError):
    """Interface currents violate the flux conservation needed for a bounded layer."""

    def __init__(self, message, mismatch=None):
        super().__init__(message)
        self.mismatch = mismatch


class ConvergenceError(GQTransportError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, history=None, spectral_radius=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []
        self.spectral_radius = spectral_radius


class ConfigError(GQTransportError, ValueError):
    """A run configuration could not be parsed or failed validation."""


class SaturationWarning(UserWarning):
    """A chemical potential hit the |A| cap and was clamped."""

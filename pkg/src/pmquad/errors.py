"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the domain of a function."""


class NumericalError(RuntimeError):
    """Base class for failures of a numerical procedure."""


class QuadratureError(NumericalError):
    pass


class RootError(NumericalError):
    pass


class CapExceededError(NumericalError):
    """A simulation extension ran past its time cap."""


class CollisionError(NumericalError):
    """Two coordinates coincide (a probability-zero event)."""

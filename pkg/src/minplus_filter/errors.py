"""Exception types raised by the library."""


class MinPlusError(Exception):
    """Base class for library errors."""


class InvalidArgumentError(MinPlusError, ValueError):
    """Argument has the wrong shape or an out-of-range value."""


class InvalidModelError(MinPlusError, ValueError):
    """A model matrix violates a definiteness or symmetry requirement."""


class UnboundedBelowError(MinPlusError, ArithmeticError):
    """A quadratic form has no finite minimum.

    Attributes
    ----------
    eigenvalue : float
        Smallest eigenvalue of the offending quadratic block.
    index : int or None
        Position of the form inside a collection, when known.
    """

    def __init__(self, eigenvalue, index=None):
        self.eigenvalue = float(eigenvalue)
        self.index = index
        where = "" if index is None else f" (form {index})"
        super().__init__(
            f"quadratic block is not positive definite{where}: "
            f"smallest eigenvalue {self.eigenvalue:.3e}"
        )


class FitError(MinPlusError, ValueError):
    """A majorant fit fell below the target function."""

    def __init__(self, theta, gap):
        self.theta = float(theta)
        self.gap = float(gap)
        super().__init__(
            f"majorant violated at theta={self.theta:.6g} "
            f"(fit - f = {self.gap:.3e}); curvature bound too small"
        )


class ConfigError(MinPlusError, ValueError):
    """Experiment configuration failed validation."""

"""Exception types shared across the package."""


class GridMismatchError(ValueError):
    """Operands live on different grids or have the wrong shape."""


class RealityError(ValueError):
    """Coefficients do not describe a real-valued function."""


class AnalyticBandwidthError(OverflowError):
    """An exponential weight exceeds the representable floating range."""


class BootstrapBreach(RuntimeError):
    """The phase margin a - lambda*theta (or delta - lambda*theta) became negative."""


class CompatibilityError(ValueError):
    """A source term is nonzero on a mode where the elliptic symbol vanishes."""


class DivergenceError(ValueError):
    """A velocity profile fails the divergence-free constraint."""

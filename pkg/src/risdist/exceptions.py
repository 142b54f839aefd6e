"""Exception types raised by the numerical kernels."""


class ConvergenceError(ArithmeticError):
    """A series or adaptive integral failed to reach the requested accuracy."""


class FitError(ValueError):
    """Moments are incompatible with a squared-K_G law."""

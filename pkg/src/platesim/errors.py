"""Exception types raised by the solvers and the config layer."""


class PlatesimError(Exception):
    """Base class for all package errors."""


class HyperbolicityError(PlatesimError):
    """Raised when min a(z) over the domain drops to or below the allowed floor."""

    def __init__(self, min_a, floor=0.0, t=None):
        self.min_a = float(min_a)
        self.floor = float(floor)
        self.t = t
        where = "" if t is None else f" at t={t:.6g}"
        super().__init__(f"hyperbolicity lost{where}: min a(z) = {self.min_a:.6g} <= {self.floor:.6g}")


class CoercivityError(PlatesimError):
    """Raised when a wave coefficient falls below the coercivity floor."""


class SolverConvergenceError(PlatesimError):
    """Raised when an iterative linear solve exhausts its iteration budget."""

    def __init__(self, message, residual):
        self.residual = float(residual)
        super().__init__(f"{message} (final relative residual {self.residual:.3e})")


class NonContractionError(PlatesimError):
    """Raised when the fixed-point iteration stops contracting."""

    def __init__(self, message, history):
        self.history = list(history)
        super().__init__(message)


class ConfigError(PlatesimError):
    """Invalid run configuration; ``key`` is the dotted path of the offending entry."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)

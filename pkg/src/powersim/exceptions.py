"""Exception hierarchy shared by all powersim modules."""


class PowerSimError(Exception):
    """Base class for all package errors."""


class ParameterError(PowerSimError, ValueError):
    """An argument lies outside its valid domain."""


class NumericError(PowerSimError, ArithmeticError):
    """A numerical routine failed to converge."""


class DesignError(PowerSimError, ValueError):
    """A design matrix or layout is malformed (rank deficient, unbalanced, ...)."""


class SimulationError(PowerSimError, RuntimeError):
    """A Monte Carlo run could not produce a trustworthy estimate."""


class ConfigError(PowerSimError, ValueError):
    """A run configuration is invalid. ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field

"""
Exception hierarchy for the default contagion engine
"""


class ContagionError(Exception):
    """Base class for every error raised by the package"""

    exit_code = 1


class ConfigError(ContagionError):
    """Input that cannot be run"""

    exit_code = 2


class MalformedConfig(ConfigError):
    """Structurally unusable input: length mismatches, nonpositive steps, unknown keys"""


class AssumptionViolation(ConfigError):
    """A checkable standing assumption fails while enforcement is on"""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class UnsupportedModel(ConfigError):
    """The moment solver only handles affine drift with rho = 1/2"""


class NumericalBlowup(ContagionError):
    """An intensity or a moment left its guard band (or became NaN)"""

    exit_code = 3


class NonConvergence(ContagionError):
    """An iterative decomposition failed to reach tolerance"""

    exit_code = 4


class RankOutOfRange(ContagionError):
    """Requested approximation rank outside [1, r]"""

    exit_code = 5

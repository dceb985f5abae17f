"""Exception hierarchy.

Each class carries a short stable ``code`` that the command-line front end
prints and maps to an exit status.
"""


class MSSTGarchError(Exception):
    code = "E_GENERIC"
    exit_status = 1


class SpecError(MSSTGarchError, ValueError):
    """Invalid model parameters or transition matrix."""

    code = "E_SPEC"
    exit_status = 4


class DataError(MSSTGarchError, ValueError):
    """Unusable input data (empty, non-numeric, non-positive prices...)."""

    code = "E_DATA"
    exit_status = 3


class ConfigError(MSSTGarchError, ValueError):
    code = "E_CONFIG"
    exit_status = 2


class NumericalError(MSSTGarchError, ArithmeticError):
    """A numerical routine failed to converge or degenerated."""

    code = "E_NUMERIC"
    exit_status = 5


class FilterError(NumericalError):
    """The mixture density of an observation underflowed to zero."""

    code = "E_FILTER"

    def __init__(self, message, index=None):
        super().__init__(message if index is None else f"{message} (observation {index})")
        self.index = index


class SamplerError(NumericalError):
    code = "E_SAMPLER"

"""
Exception hierarchy. Each class carries the CLI exit code it maps to.
"""
from consts import EXIT_DATA, EXIT_NUMERICAL, EXIT_USAGE


class ProxyCasfError(Exception):
    """Root of every error raised by this package"""
    exit_code = EXIT_USAGE

    def to_record(self):
        """Machine-readable error record for the CLI"""
        return {
            "status": "error",
            "error": type(self).__name__,
            "message": str(self),
            "exit_code": self.exit_code,
        }


class ConfigError(ProxyCasfError):
    exit_code = EXIT_USAGE


class DataError(ProxyCasfError):
    exit_code = EXIT_DATA


class BasisError(DataError):
    """Basis evaluation rejected its input (unseen discrete level, wrong width)"""


class NumericalError(ProxyCasfError):
    exit_code = EXIT_NUMERICAL


class SingularSystemError(NumericalError):
    def __init__(self, rank, size, context=""):
        self.rank = rank
        self.size = size
        where = f" in {context}" if context else ""
        super().__init__(
            f"singular system{where}: Gram matrix has numerical rank {rank} of {size} at lambda=0"
        )


class IdentificationError(NumericalError):
    """The model violates completeness or the solve has no exact solution"""


class AbsoluteContinuityError(IdentificationError):
    pass


class RangeConditionError(IdentificationError):
    pass


class BootstrapFailureError(NumericalError):
    pass

"""Exception hierarchy.

Every error raised by the library derives from :class:`SeqmctError`, which the
CLI maps to exit code 1 with a JSON payload on stderr.
"""


class SeqmctError(Exception):
    """Base class for domain errors."""

    code = "error"

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


class NonSquare(SeqmctError, ValueError):
    code = "NonSquare"


class NegativeEntry(SeqmctError, ValueError):
    code = "NegativeEntry"


class RowSumViolation(SeqmctError, ValueError):
    code = "RowSumViolation"


class DimensionMismatch(SeqmctError, ValueError):
    code = "DimensionMismatch"


class InvalidDistribution(SeqmctError, ValueError):
    code = "InvalidDistribution"


class NotErgodic(SeqmctError, ValueError):
    code = "NotErgodic"


class NoConvergence(SeqmctError, RuntimeError):
    code = "NoConvergence"


class EigenFailure(SeqmctError, RuntimeError):
    code = "EigenFailure"


class SingularSystem(SeqmctError, RuntimeError):
    code = "SingularSystem"


class DomainError(SeqmctError, ValueError):
    code = "DomainError"


class Infeasible(SeqmctError, ValueError):
    code = "Infeasible"


class InvalidState(SeqmctError, RuntimeError):
    code = "InvalidState"


class ConfigError(SeqmctError, ValueError):
    code = "ConfigError"

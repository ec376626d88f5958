"""Exception hierarchy shared across the toolkit."""


class MinavError(Exception):
    """Base class for all toolkit errors."""


class NotARotation(MinavError, ValueError):
    pass


class DegenerateRange(MinavError, ValueError):
    """Receiver too close to the transmitter for the dipole model."""


class EstimationError(MinavError):
    """Any failure raised while producing an estimate."""


class SingularNormalEquations(EstimationError):
    pass


class NonFiniteResidual(EstimationError):
    pass


class InvalidPrior(MinavError, ValueError):
    pass


class NotStatic(EstimationError, ValueError):
    """Accelerometer data does not look quasi-static."""


class MissingGyro(MinavError, ValueError):
    pass


class UnsupportedSchedule(EstimationError, ValueError):
    pass


class ZeroChannel(EstimationError, ValueError):
    pass


class ZeroSignal(MinavError, ValueError):
    pass


class DegenerateGramian(EstimationError):
    pass


class RankDeficient(EstimationError):
    pass


class BadConfig(MinavError, ValueError):
    pass


class SingularInformation(MinavError, ValueError):
    pass


class ExperimentFailed(MinavError):
    pass


class SchemaError(MinavError, ValueError):
    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field

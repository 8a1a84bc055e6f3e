"""Exception hierarchy with stable machine-readable codes.

Every error carries a ``code`` attribute (its class name) that the CLI
emits verbatim, and an ``exit_code``: 1 for data/precondition problems,
2 for numerical solver failures.
"""


class MissurvError(Exception):
    exit_code = 1

    @property
    def code(self) -> str:
        return type(self).__name__


class DataError(MissurvError):
    """The input data or a precondition on it is invalid."""

    exit_code = 1


class SolverError(MissurvError):
    """A numerical procedure failed on otherwise valid data."""

    exit_code = 2


# -- data model -------------------------------------------------------------

class EmptyDataset(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class NonFiniteValue(DataError):
    pass


class NegativeTime(DataError):
    pass


class MixedStatusKinds(DataError):
    pass


class InvalidCSV(DataError):
    pass


# -- estimator preconditions ------------------------------------------------

class UnknownStatusInFullData(DataError):
    pass


class UnknownStatusPresent(DataError):
    pass


class RhoZero(DataError):
    pass


class RhoDegenerate(DataError):
    pass


class TauDegenerate(DataError):
    pass


class NoEvents(DataError):
    pass


class NoCompleteEvents(DataError):
    pass


class NoEventsBeforeT(DataError):
    pass


class NoDeaths(DataError):
    pass


class MissingD(DataError):
    pass


# -- numerical failures -----------------------------------------------------

class EmptyRiskSetAtEvent(SolverError):
    pass


class SingularJacobian(SolverError):
    pass


class MaxIterations(SolverError):
    pass


class SingularBread(SolverError):
    pass


class ZeroVariance(SolverError):
    pass


class TooManyFailures(SolverError):
    pass

"""Exception hierarchy. ``exit_code`` is what the CLI returns for each family."""


class DigMilpError(Exception):
    exit_code = 1


class ValidationError(DigMilpError, ValueError):
    exit_code = 2


class DimensionMismatch(ValidationError):
    pass


class ParseError(ValidationError):
    pass


class FormatError(ValidationError):
    pass


class ConfigInfeasible(ValidationError):
    pass


class FeasibilityViolation(ValidationError):
    pass


class NegativeFeature(ValidationError):
    pass


class LastConstraint(ValidationError):
    pass


class EmptyCorpus(ValidationError):
    pass


class ConstantInput(ValidationError):
    pass


class DegenerateRange(DigMilpError):
    pass


class SolverLimit(DigMilpError):
    exit_code = 3


class PivotLimitExceeded(SolverLimit):
    pass


class NodeLimitExceeded(SolverLimit):
    pass


class LabelingFailure(DigMilpError):
    exit_code = 3


class AssemblyFailure(DigMilpError):
    exit_code = 4

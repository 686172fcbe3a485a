"""
Exception hierarchy shared by every app of the project.

All errors raised by library code derive from SelectionEvalError so the
management commands can translate them into exit codes in one place.
The default messages are part of the public contract and are matched in
tests, keep them stable.
"""


class SelectionEvalError(Exception):
    """Base class for errors raised by the evaluation library."""

    default_message = 'selection evaluation error'

    def __init__(self, message=None, **details):
        self.message = message or self.default_message
        self.details = details
        super().__init__(self.message)


class EmptyPopulationError(SelectionEvalError):
    default_message = 'empty population'


class UnlabeledSampleError(SelectionEvalError):
    default_message = 'unlabeled sample in metric computation'


class DegenerateCurveError(SelectionEvalError):
    default_message = 'degenerate curve'


class PositivityViolation(SelectionEvalError):
    default_message = 'positivity violation'


class InvalidParameterError(SelectionEvalError, ValueError):
    default_message = 'invalid parameter'


class UndefinedMetricError(SelectionEvalError):
    """Raised when an undefined MetricValue is coerced to float."""

    default_message = 'undefined metric'

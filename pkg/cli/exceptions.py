from evaluation.exceptions import SelectionEvalError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_VALIDATION = 3


class ConfigError(SelectionEvalError):
    default_message = 'invalid configuration'


class ValidationFailure(SelectionEvalError):
    """One or more self-test properties failed; details['failures'] holds the counterexamples."""
    default_message = 'validation failed'

from evaluation.exceptions import SelectionEvalError


class PopulationFileError(SelectionEvalError):
    """Unreadable or malformed (score, label) file; the message names the line."""
    default_message = 'malformed population file'

from evaluation.exceptions import SelectionEvalError


class MissingScenarioError(SelectionEvalError):
    default_message = 'missing scenario'

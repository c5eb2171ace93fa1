"""Exception types.  Everything raised for bad input derives from
:class:`SimplicityError`; the CLI maps those to exit status 1."""


class SimplicityError(Exception):
    pass


class GrammarSyntaxError(SimplicityError):
    def __init__(self, message, line, column):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class GrammarValidationError(SimplicityError):
    pass


class OutOfVocabularyError(SimplicityError):
    def __init__(self, token, line=None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"out-of-vocabulary token {token!r}{where}")
        self.token = token
        self.line = line


class ConditioningError(SimplicityError):
    """Conditioning on an event of probability zero."""


class ClassExhaustedError(SimplicityError):
    """Every hypothesis assigns probability zero to the observed data."""


class BudgetExceededError(SimplicityError):
    pass


class ParameterError(SimplicityError, ValueError):
    pass


class ManifestError(SimplicityError):
    pass


class StructuralError(SimplicityError):
    """A grammar pair is not an overgeneral/restricted pair in a context."""


class CorpusError(SimplicityError):
    pass

"""Exception hierarchy shared by every chromamix module."""


class ChromamixError(Exception):
    """Base class for all chromamix errors."""


class EmptyInputError(ChromamixError, ValueError):
    pass


class InvalidInputError(ChromamixError, ValueError):
    pass


class FormatError(ChromamixError, ValueError):
    """Unsupported or malformed audio encoding."""


class BoundsError(ChromamixError, IndexError):
    pass


class ParameterError(ChromamixError, ValueError):
    pass


class ShapeError(ChromamixError, ValueError):
    pass


class ModeError(ChromamixError, ValueError):
    """Stem role does not match the requested matching mode."""


class InsufficientCandidatesError(ChromamixError):
    pass


class InsufficientDurationError(ChromamixError):
    pass


class ValidationError(ChromamixError, ValueError):
    pass


class DanglingReferenceError(ValidationError):
    """A manifest entry points at a file that does not exist."""

    def __init__(self, path):
        super().__init__(f"referenced file does not exist: {path}")
        self.path = path


class UndefinedReferenceError(ChromamixError, ValueError):
    """SDR is undefined for a zero-energy reference."""


class EmptyEvaluationError(ChromamixError):
    pass


class SeparatorError(ChromamixError):
    pass

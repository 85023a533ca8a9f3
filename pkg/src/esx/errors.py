"""Exception hierarchy shared by every esx module."""


class EsxError(Exception):
    """Base class for all esx errors."""


class EvaluationDomainError(EsxError, ValueError):
    """A cost (or right-hand side) produced a non-finite value."""


class ArgumentDomainError(EsxError, ValueError):
    """An argument lies outside the documented domain of an operation."""


class BracketError(EsxError, ValueError):
    """Bisection was asked to search a bracket without a sign change.

    ``signs`` holds the sign pattern of the field sampled across the bracket,
    which tells the caller whether the attractor is a set rather than a point.
    """

    def __init__(self, message, grid=None, signs=None):
        super().__init__(message)
        self.grid = grid
        self.signs = signs


class ConfigError(EsxError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field

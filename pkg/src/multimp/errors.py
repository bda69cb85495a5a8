"""Exception hierarchy.

Configuration problems (bad names, parameters, expressions, arity) derive
from :class:`ConfigError`; anything that goes wrong while evaluating numbers
derives from :class:`NumericalError`. The CLI maps the two families to
different exit codes.
"""


class MultimpError(Exception):
    pass


class ConfigError(MultimpError, ValueError):
    pass


class NumericalError(MultimpError, ArithmeticError):
    pass


class ProblemError(ConfigError):
    """Unknown catalog name, invalid parameters or malformed problem file."""


class ArityError(ConfigError):
    pass


class DomainViolation(ConfigError):
    """A point, support or grid falls outside the problem domain."""


class EvaluationError(NumericalError):
    """Non-finite or failing evaluation, carrying the offending location."""

    def __init__(self, message, where=None):
        super().__init__(message if where is None else f"{message} at {where}")
        self.where = where

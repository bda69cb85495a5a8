"""Numerical checks of the rank-one maximum principle for multiple-integral problems."""

__version__ = "0.1.0"

from .errors import ConfigError, MultimpError, NumericalError  # noqa: E402
from .problems import ProblemInstance, catalog_get, load_problem  # noqa: E402

__all__ = ["ConfigError", "MultimpError", "NumericalError", "ProblemInstance", "catalog_get", "load_problem",
           "__version__"]

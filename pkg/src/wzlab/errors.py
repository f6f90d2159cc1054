"""Exception hierarchy.

Numerical failures share :class:`NumericalError` so the CLI can map them to a
single exit status; configuration problems raise :class:`ConfigError`.
"""


class WzlabError(Exception):
    """Base class for all package errors."""


class ConfigError(WzlabError, ValueError):
    """Invalid experiment configuration.  ``key`` names the offending entry."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class NumericalError(WzlabError, ArithmeticError):
    pass


class DomainError(NumericalError, ValueError):
    """Argument outside the domain where a formula applies."""


class IntegrationError(NumericalError):
    """Quadrature did not reach the requested tolerance."""


class SingularDesign(NumericalError):
    """OLS design matrix is rank deficient or badly conditioned."""


class InsufficientSamples(NumericalError):
    pass


class Infeasible(NumericalError):
    """Requested targets cannot be met (nonpositive slack or empty region)."""


class SolverNoConverge(NumericalError):
    pass

"""Exception types raised across the package."""


class MultimatrixError(Exception):
    """Base class for every error raised by multimatrix"""


class DomainError(MultimatrixError, ValueError):
    """An argument lies outside the domain or support of an operation"""


class NotPositiveDefinite(DomainError):
    """A matrix failed the symmetric positive definite check"""


class NegativeArgument(DomainError):
    """A kernel was evaluated at a negative argument"""


class DegenerateBlock(DomainError):
    """A derived statistic is undefined for the given blocks (zero norm, singular Gram)"""


class QuadratureFailure(MultimatrixError):
    """Adaptive quadrature did not reach the requested tolerance"""


class DatasetError(MultimatrixError):
    """A dataset, parameter or report document failed to parse or validate"""


class UnsupportedConfiguration(MultimatrixError):
    """The requested family/structure combination is not supported by an operation"""


class ConfigError(MultimatrixError):
    """An environment setting could not be parsed"""

"""Exception types shared across the package."""


class RandskewError(Exception):
    """Base class for all errors raised by this package."""


class NotPositiveDefinite(RandskewError):
    """A matrix required to be positive definite is not (numerically).

    ``pivot_index`` is the index of the failing Cholesky pivot or
    eigenvalue, when known.
    """

    def __init__(self, message, pivot_index=None):
        super().__init__(message)
        self.pivot_index = pivot_index


class NoConvergence(RandskewError):
    """An iterative procedure exhausted its iteration budget."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class NotPowerOfTwo(RandskewError):
    """An input length that must be a power of two is not."""


class SketchTooSmall(RandskewError):
    """Sketch size too small for a debiasing weight to exist.

    ``index`` names the violating row for the fine-grained schemes.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class AllZeroRows(RandskewError):
    """Row-norm sampling requested on an all-zero matrix."""


class ZeroProbabilityWithPositiveScore(RandskewError):
    """A row with positive leverage score has zero sampling probability."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class IndexOutOfRange(RandskewError):
    """A sketch references a row index outside the target matrix."""


class AllTrialsSingular(RandskewError):
    """Every Monte-Carlo trial produced a singular sketched Gram."""


class ParseError(RandskewError):
    """Malformed input data file."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class LabelDomainError(RandskewError):
    """Labels outside the domain required by the problem kind."""


class ConfigError(RandskewError):
    """Invalid or incomplete experiment configuration."""

"""Exception hierarchy shared by all gldual modules."""


class GLDualError(Exception):
    """Base class for every error raised by gldual."""


class DimensionMismatch(GLDualError, ValueError):
    pass


class InvalidGrid(GLDualError, ValueError):
    pass


class InvalidParameter(GLDualError, ValueError):
    pass


class NotPositiveDefinite(GLDualError):
    pass


class NotPositiveSemidefinite(GLDualError):
    pass


class NoConvergence(GLDualError):
    """An iterative method hit its iteration cap.

    ``best`` holds the best iterate seen and ``residual`` its residual norm,
    so callers can inspect how far the run got.
    """

    def __init__(self, message, best=None, residual=None, iterations=None):
        super().__init__(message)
        self.best = best
        self.residual = residual
        self.iterations = iterations


class NotConvex(GLDualError):
    pass


class NotConcave(GLDualError):
    pass


class NotInBstar(GLDualError):
    pass


class LeftBstar(GLDualError):
    pass


class NotInBstarT(GLDualError):
    pass


class SingularNode(GLDualError):
    def __init__(self, index, det=None):
        super().__init__(f"2x2 block at node {index} is singular (det={det!r})")
        self.index = index
        self.det = det


class MixedSignF(GLDualError, ValueError):
    pass


class HypothesisViolated(GLDualError):
    pass


class PreconditionError(GLDualError, ValueError):
    pass


class ConfigError(GLDualError, ValueError):
    pass


class ParseError(ConfigError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnknownKey(ConfigError):
    pass


class MissingRequired(ConfigError):
    pass

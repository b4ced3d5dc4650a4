"""Exception types raised across the package."""


class GaussAreaError(Exception):
    """Base class for all errors raised by :mod:`gaussarea`."""


class NonSimple(GaussAreaError, ValueError):
    pass


class NotUnit(GaussAreaError, ValueError):
    pass


class BaseMismatch(GaussAreaError, ValueError):
    pass


class NotTangent(GaussAreaError, ValueError):
    pass


class OutOfRange(GaussAreaError, ValueError):
    pass


class DegenerateChart(GaussAreaError):
    pass


class InequalityViolation(GaussAreaError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ImmersionLost(GaussAreaError):
    pass


class SeamMismatch(GaussAreaError):
    pass


class HandleOverlap(GaussAreaError, ValueError):
    pass


class IndexTooCoarse(GaussAreaError):
    pass


class DegenerateFit(GaussAreaError):
    """The best-fit round sphere collapsed to a point.

    The fit that triggered the condition is kept on ``self.fit``.
    """

    def __init__(self, message, fit=None):
        super().__init__(message)
        self.fit = fit

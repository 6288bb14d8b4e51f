"""Exception hierarchy for cccharts."""

from typing import Optional, Sequence


class CCChartsError(Exception):
    """Base class for every error raised by the library."""


class ExprSyntaxError(CCChartsError, ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.msg = message
        self.offset = offset


class UnknownIdentifierError(ExprSyntaxError):
    pass


class DomainError(CCChartsError, ArithmeticError):
    """Evaluation left the domain of an elementary function."""


class SpanError(CCChartsError):
    """The fields do not span the tangent space at a point."""

    def __init__(self, message: str, point: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.point = None if point is None else [float(v) for v in point]


class FlowError(CCChartsError):
    """A trajectory left the domain box, blew up, or hit a domain error."""

    def __init__(self, message: str, time: float, state: Sequence[float], reason: str):
        super().__init__(message)
        self.time = float(time)
        self.state = [float(v) for v in state]
        self.reason = reason


class PicardError(CCChartsError):
    pass


class ChartError(CCChartsError):
    pass


class InjectivityError(ChartError):
    pass


class IFTError(ChartError):
    pass


class ConvergenceError(CCChartsError):
    pass


class GraphError(CCChartsError):
    pass


class GridMismatchError(CCChartsError, ValueError):
    pass


class ConfigError(CCChartsError):
    """Invalid configuration file or command line values (exit code 2)."""

"""Exception hierarchy shared by all hflow modules."""


class HFlowError(Exception):
    """Base class for every error raised by hflow."""


class MeshError(HFlowError):
    pass


class CurveError(HFlowError):
    pass


class TooFewPoints(CurveError):
    pass


class SelfIntersecting(CurveError):
    pass


class Degenerate(CurveError):
    pass


class ObstacleError(HFlowError):
    pass


class NotOnBoundary(ObstacleError):
    pass


class NoBoundary(ObstacleError):
    pass


class OutsideObstacle(ObstacleError):
    pass


class ObstacleViolation(ObstacleError):
    pass


class InfeasibleAnchors(HFlowError):
    pass


class NonAdmissibleField(HFlowError):
    pass


class UnsupportedCombination(HFlowError):
    pass


class NotAdmissible(HFlowError):
    pass


class LineSearchStall(HFlowError):
    """Raised only on request; the flow normally records a stall as a flag."""


class SchemaError(HFlowError):
    """Configuration error naming the offending dotted key."""

    def __init__(self, key, reason):
        self.key = key
        self.reason = reason
        super().__init__(f"{key}: {reason}")

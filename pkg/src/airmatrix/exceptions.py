"""Exception hierarchy shared by all airmatrix modules."""


class AirMatrixError(Exception):
    """Base class for every error raised by this package."""


class PointOutOfBounds(AirMatrixError, ValueError):
    pass


class DegenerateSpeeds(AirMatrixError, ValueError):
    pass


class InvalidScale(AirMatrixError, ValueError):
    pass


class MalformedPolygon(AirMatrixError, ValueError):
    pass


class ConflictError(AirMatrixError):
    """A reservation overlaps an existing one.

    ``blocking`` holds the ``(start, end, owner)`` triple already stored in
    the block, ``block`` the offending block index.
    """

    def __init__(self, block, blocking, message=None):
        self.block = block
        self.blocking = blocking
        if message is None:
            start, end, owner = blocking
            message = (
                f"block {tuple(block)} already held by owner {owner} "
                f"over [{start}, {end})"
            )
        super().__init__(message)


class PlanningError(AirMatrixError):
    """Per-flight planning failure; collected by the batch runner."""


class NoPathFound(PlanningError):
    pass


class BlockedEndpoint(NoPathFound):
    """Start or goal lies inside a building, so no path can exist."""


class DepartureConflict(PlanningError):
    pass


class NotAdjacent(AirMatrixError, ValueError):
    pass


class InfeasibleScenario(AirMatrixError, ValueError):
    pass


class IdMismatch(AirMatrixError, ValueError):
    pass

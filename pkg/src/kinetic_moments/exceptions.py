class DomainViolation(ValueError):
    """A multiplier produced an ansatz argument outside the dual domain."""


class OverflowGuard(FloatingPointError):
    """Maxwell-Boltzmann exponent above the configured cap."""


class ClosureError(RuntimeError):
    """A dual solve failed while evaluating a closure quantity.

    ``points`` holds the flat indices of the failed moment vectors within the
    batch that was being closed; callers that know the grid layout re-raise
    with cell and time information in ``where``.
    """

    def __init__(self, message, points=(), where=None):
        super().__init__(message)
        self.points = tuple(int(p) for p in points)
        self.where = where or {}


class GridMismatch(ValueError):
    pass

"""Exception hierarchy shared across the package."""


class ToruslaxError(Exception):
    """Base class for all package errors."""


class PoleGuardError(ToruslaxError):
    """Evaluation point too close to a lattice of poles/zeros.

    Carries the offending point and the nearest lattice point so callers
    (integrators in particular) can report where the singularity sits.
    """

    def __init__(self, point: complex, nearest: complex, message: str = ""):
        self.point = point
        self.nearest = nearest
        super().__init__(
            message
            or f"point {point} within pole guard of lattice point {nearest}"
        )


class TruncationError(ToruslaxError):
    """Theta series failed to converge within the index cap (Im of the
    modulus too small for the truncation policy)."""


class CollisionError(ToruslaxError):
    """A phase-space configuration violates the collision guard: some
    root pairing alpha.q sits on (or too close to) a pole lattice."""

    def __init__(self, message: str, last_good=None):
        self.last_good = last_good
        super().__init__(message)


class SingularPathError(ToruslaxError):
    """A requested path passes too close to a singular point."""


class StepSizeError(ToruslaxError):
    """Adaptive integrator step size underflowed."""

    def __init__(self, message: str, last_good=None):
        self.last_good = last_good
        super().__init__(message)

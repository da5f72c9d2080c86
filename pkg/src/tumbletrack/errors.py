"""Exception types raised across the package."""


class TumbleTrackError(Exception):
    """Base class for all package errors."""


class ErrorStateOverflow(TumbleTrackError, ValueError):
    """A small-rotation vector had norm > 1 and cannot form a unit quaternion."""


class FilterDivergence(TumbleTrackError):
    """The Kalman filter produced an error state it cannot fold back."""


class MeasurementRejected(TumbleTrackError):
    """Innovation covariance too ill-conditioned to invert safely."""


class DegenerateCorrespondence(TumbleTrackError, ValueError):
    """Fewer than three point pairs were supplied to the alignment."""


class AlignmentAmbiguous(TumbleTrackError):
    """The dominant eigenvalue of the alignment matrix is not simple."""


class SingularInertiaRatio(TumbleTrackError, ValueError):
    """Inertia ratio at a pole of the torque gain (p_x = +-1)."""


class SingularGravity(TumbleTrackError, ValueError):
    """Target position too close to the Earth's centre to evaluate gravity."""


class NonPhysicalInertia(TumbleTrackError, ValueError):
    """Principal moments are non-positive or violate the triangle inequality."""


class ConfigError(TumbleTrackError, ValueError):
    """Scenario configuration could not be parsed or validated."""

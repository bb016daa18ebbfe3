"""Exception hierarchy shared across the package."""


class CalibError(Exception):
    """Base class for all calibration errors."""


class InvalidArgumentError(CalibError, ValueError):
    """An argument violates a documented precondition."""


class InvalidConfigError(CalibError, ValueError):
    """A configuration value is out of its allowed range."""


class DegenerateRotationError(CalibError):
    """Rotation at or too close to 180 degrees for a well-defined log."""


class EmptyBatchError(CalibError):
    """No valid points left to sample; the caller should skip the iteration."""


class DegenerateSceneError(CalibError):
    """Scene labels carry no registration signal (flat score map)."""


class InsufficientCorrespondencesError(CalibError):
    """Fewer class-agreeing bins than the minimum needed for PnP."""


class DegenerateGeometryError(CalibError):
    """Point configuration (e.g. coplanar) does not determine a pose."""


class DivergedError(CalibError):
    """Optimization lost the scene; projected points stayed out of view."""


class NonFiniteError(CalibError):
    """A gradient or objective value became NaN or infinite."""

"""Exception types shared across the pipeline."""


class RadarPoseError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(RadarPoseError):
    """A radar / network / CFAR configuration is inconsistent or out of range."""


class ValidationError(RadarPoseError):
    """An input object (scene, pose set, file) violates its invariants."""


class DimensionError(RadarPoseError):
    """An array does not have the shape required by the operation."""


class AnnotationError(RadarPoseError):
    """Ground-truth targets and predictions cannot be reconciled."""


class NumericalError(RadarPoseError):
    """A computation produced non-finite values or diverged."""

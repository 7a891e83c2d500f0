"""Exception types raised by the public API."""


class AttfuseError(Exception):
    """Base class for all library errors."""


class DegenerateInputError(AttfuseError):
    """An input is too close to zero (or otherwise ill-posed) to use."""


class SingularOrientationError(AttfuseError):
    """Fused yaw is undefined: the body is exactly upside down."""


class GimbalLockError(AttfuseError):
    """ZYX yaw is undefined: the body x-axis is collinear with global z."""


class ConfigError(AttfuseError):
    """A configuration violates its invariants."""

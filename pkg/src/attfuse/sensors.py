"""Sensor measurement models: raw triples -> normalized filter inputs."""

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from . import _kernels as _k
from .errors import ConfigError, DegenerateInputError

EPS_ACC_REL = _k.EPS_ACC_REL  # accelerometer threshold, fraction of g
EPS_MAG = 1e-6  # unbiased magnetic field norm threshold


class MagMode(IntEnum):
    FULL_3D = _k.MAG_FULL
    XY_ONLY = _k.MAG_XY
    HEADING = _k.MAG_HEADING
    ABSENT = _k.MAG_ABSENT


def _vec3(v):
    out = np.asarray(v, dtype=float)
    if out.shape != (3,):
        raise ValueError(f"expected 3-vector, got shape {out.shape}")
    return out


@dataclass(frozen=True)
class Calibration:
    """Fixed calibration inputs; estimating them is out of scope.

    mag_reference is the global magnetic field reference used by the
    magnetometer resolution method. Only its xy projection matters; a zero
    projection renders the magnetometer unusable (the resolution method
    then always falls back).
    """

    acc_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    mag_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gravity: float = 9.81
    mag_reference: tuple = (1.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "acc_bias", _vec3(self.acc_bias))
        object.__setattr__(self, "mag_bias", _vec3(self.mag_bias))
        if not self.gravity > 0.0:
            raise ConfigError("gravity must be positive")
        mr = tuple(float(c) for c in self.mag_reference)
        if len(mr) != 2:
            raise ConfigError("mag_reference must be the (x, y) global field")
        object.__setattr__(self, "mag_reference", mr)

    @property
    def mag_reference_norm(self):
        return math.hypot(*self.mag_reference)


@dataclass(frozen=True)
class SensorFrame:
    """One timestamped set of raw measurements.

    gyro is rad/s, acc is m/s^2 (None when the accelerometer is absent for
    the frame), mag is in arbitrary consistent units. For MagMode.HEADING
    the field measurement is the heading angle in radians; for
    MagMode.XY_ONLY only mag[0:2] are meaningful.
    """

    t: float
    gyro: np.ndarray
    acc: np.ndarray | None = None
    acc_z_valid: bool = True
    mag: np.ndarray | None = None
    mag_mode: MagMode = MagMode.ABSENT
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "gyro", _vec3(self.gyro))
        if self.acc is not None:
            object.__setattr__(self, "acc", _vec3(self.acc))
        if self.mag is not None:
            object.__setattr__(self, "mag", _vec3(self.mag))


def acc_to_up_vector(acc, cal):
    """Unit vector toward global up, in body coordinates.

    Raises DegenerateInputError when the unbiased acceleration is too small
    (free fall); the caller should skip the correction term that cycle.
    """
    a = _vec3(acc) - cal.acc_bias
    n = math.sqrt(float(a @ a))
    if n <= EPS_ACC_REL * cal.gravity:
        raise DegenerateInputError("acceleration norm too small to define up")
    return -a / n


def reconstruct_acc_z(a_x, a_y, g):
    """Missing z acceleration from |a| = g; assumes the upper hemisphere."""
    return -math.sqrt(max(g * g - a_x * a_x - a_y * a_y, 0.0))


def mag_to_unit(frame, cal):
    """Normalized magnetic field direction for a frame, or None.

    None means the magnetometer is absent or degenerate this cycle and the
    estimator should use the magnetometer-free path.
    """
    mode = frame.mag_mode
    if mode == MagMode.ABSENT:
        return None
    if mode == MagMode.HEADING:
        return np.array([math.cos(frame.heading), math.sin(frame.heading), 0.0])
    if frame.mag is None:
        return None
    m = frame.mag - cal.mag_bias
    if mode == MagMode.XY_ONLY:
        m = np.array([m[0], m[1], 0.0])
    n = math.sqrt(float(m @ m))
    if n <= EPS_MAG:
        return None
    return m / n


def unbias_gyro(gyro, bias):
    return _vec3(gyro) - _vec3(bias)

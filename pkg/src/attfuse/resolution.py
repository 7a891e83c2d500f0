"""Measured-orientation resolution.

Builds the instantaneous measured orientation q_y from the body-frame up
vector, optionally the magnetometer, and the current estimate. Every
method, on every path, returns a q_y whose inverse maps global z onto the
supplied up vector ("respect z"): the magnetometer and any estimate-based
assumptions only ever influence yaw.
"""

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import _kernels as _k


class ResolutionMethod(IntEnum):
    MAGNETOMETER = _k.METHOD_MAG
    ZYX_YAW = _k.METHOD_ZYX
    FUSED_YAW = _k.METHOD_FUSED


class ResolutionPath(IntEnum):
    PRIMARY = _k.PATH_PRIMARY
    FALLBACK_ZYX = _k.PATH_FALLBACK_ZYX
    FALLBACK_ZXY = _k.PATH_FALLBACK_ZXY
    FALLBACK_FUSED = _k.PATH_FALLBACK_FUSED


@dataclass(frozen=True)
class ResolutionOutcome:
    quat: np.ndarray
    path: ResolutionPath


def _vec3(v):
    out = np.asarray(v, dtype=float)
    if out.shape != (3,):
        raise ValueError(f"expected 3-vector, got shape {out.shape}")
    return out


def _quat(q):
    out = np.asarray(q, dtype=float)
    if out.shape != (4,):
        raise ValueError(f"expected quaternion, got shape {out.shape}")
    return out


def resolve_magnetometer(up, mag, mag_reference, q_est,
                         fallback=ResolutionMethod.FUSED_YAW):
    """Full-orientation fit to the up vector and magnetic field direction.

    The yaw is chosen so that the field, rotated to the global frame,
    projects onto the xy-plane parallel to mag_reference = (mex, mey).
    Falls back to the given yaw method when the field is (numerically)
    vertical.
    """
    up = _vec3(up)
    mag = _vec3(mag)
    mex, mey = (float(c) for c in mag_reference)
    q = _quat(q_est)
    w, x, y, z, path = _k.resolve_mag(
        up[0], up[1], up[2], mag[0], mag[1], mag[2],
        mex, mey, q[0], q[1], q[2], q[3], int(fallback))
    return ResolutionOutcome(np.array([w, x, y, z]), ResolutionPath(path))


def resolve_zyx_yaw(up, q_est):
    """Orientation respecting `up` with zero ZYX yaw relative to q_est.

    Switches to zeroing the ZXY yaw when the relative orientation is in
    gimbal lock; that fallback cannot fail given the primary did.
    """
    up = _vec3(up)
    q = _quat(q_est)
    w, x, y, z, path = _k.resolve_zyx(
        up[0], up[1], up[2], q[0], q[1], q[2], q[3])
    return ResolutionOutcome(np.array([w, x, y, z]), ResolutionPath(path))


def resolve_fused_yaw(up, q_est):
    """Orientation respecting `up` with zero fused yaw relative to q_est.

    Evaluated directly on the quaternion (no rotation matrix is built).
    Falls back to the ZYX method only when the relative rotation is exactly
    pi radians about an axis in the xy plane.
    """
    up = _vec3(up)
    q = _quat(q_est)
    w, x, y, z, path = _k.resolve_fused(
        up[0], up[1], up[2], q[0], q[1], q[2], q[3])
    return ResolutionOutcome(np.array([w, x, y, z]), ResolutionPath(path))

"""Quaternion and rotation-matrix algebra.

Conventions
-----------
* Quaternions are stored in (w, x, y, z) order. Many sensor-fusion
  ecosystems use (x, y, z, w) instead -- check before interoperating.
* q and -q represent the same rotation; comparisons should be
  sign-agnostic. ``matrix_to_quat`` does not canonicalize the sign.
* ``rotate_vector(q, v)`` maps body coordinates to global coordinates when
  q is the body orientation; ``rotate_vector(quat_conjugate(q), v)`` maps
  the other way.
* Angles returned by the yaw functions are wrapped to (-pi, pi].
"""

import math

import numpy as np

from . import _kernels as _k
from .errors import DegenerateInputError, GimbalLockError, SingularOrientationError

EPS_SING = _k.EPS_SING
EPS_NORM = _k.EPS_NORM


def _as_quat(q):
    q = np.asarray(q, dtype=float)
    if q.shape != (4,):
        raise ValueError(f"expected quaternion of shape (4,), got {q.shape}")
    return q


def _as_vec3(v):
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"expected vector of shape (3,), got {v.shape}")
    return v


def quat_identity():
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_multiply(a, b):
    """Hamilton product a * b."""
    a = _as_quat(a)
    b = _as_quat(b)
    return np.array(_k.quat_mult(a[0], a[1], a[2], a[3], b[0], b[1], b[2], b[3]))


def quat_conjugate(q):
    q = _as_quat(q)
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_normalize(q):
    q = _as_quat(q)
    n = math.sqrt(float(q @ q))
    if n <= EPS_NORM:
        raise DegenerateInputError("cannot normalize a near-zero quaternion")
    return q / n


def z_rotation(psi):
    """Unit quaternion for a rotation by psi about the z axis."""
    h = 0.5 * psi
    return np.array([math.cos(h), 0.0, 0.0, math.sin(h)])


def quat_from_axis_angle(axis, angle):
    axis = _as_vec3(axis)
    n = math.sqrt(float(axis @ axis))
    if n <= EPS_NORM:
        raise DegenerateInputError("axis must be nonzero")
    h = 0.5 * angle
    s = math.sin(h) / n
    return np.array([math.cos(h), s * axis[0], s * axis[1], s * axis[2]])


def rotate_vector(q, v):
    """Rotate v by q using the t = 2(qvec x v) form; norm preserving."""
    q = _as_quat(q)
    v = _as_vec3(v)
    return np.array(_k.rotate_vec(q[0], q[1], q[2], q[3], v[0], v[1], v[2]))


def quat_to_matrix(q):
    """3x3 rotation matrix for q, entries coerced to [-1, 1]."""
    q = _as_quat(q)
    m = _k.quat_to_mat(q[0], q[1], q[2], q[3])
    return np.array(m).reshape(3, 3)


def matrix_to_quat(R):
    """Robust four-case matrix -> quaternion conversion.

    Near-SO(3) input is accepted; the result is normalized. The sign of the
    output depends on the branch taken.
    """
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise ValueError(f"expected matrix of shape (3, 3), got {R.shape}")
    w, x, y, z, _ = _k.mat_to_quat(
        R[0, 0], R[0, 1], R[0, 2],
        R[1, 0], R[1, 1], R[1, 2],
        R[2, 0], R[2, 1], R[2, 2])
    return np.array([w, x, y, z])


def wrap_angle(a):
    """Wrap an angle to (-pi, pi]."""
    return _k.wrap_pi(float(a))


def fused_yaw(q):
    """Fused yaw of q: the heading of the tilt-free part of the rotation.

    Raises SingularOrientationError when the body z axis is antiparallel to
    global z (the one unavoidable singularity of any yaw definition).
    """
    q = _as_quat(q)
    w, z = q[0], q[3]
    # |L_q(e_z) - (0,0,-1)| = 2 sqrt(w^2 + z^2) for unit q.
    if w * w + z * z <= 0.25 * EPS_SING * EPS_SING:
        raise SingularOrientationError("fused yaw undefined: body is upside down")
    return _k.fused_yaw_unchecked(q[0], q[1], q[2], q[3])


def zyx_yaw(q):
    """Z parameter of the Z-Y'-X'' Euler decomposition of q.

    Raises GimbalLockError when the body x axis is collinear with global z.
    """
    q = _as_quat(q)
    w, x, y, z = q
    c1 = 1.0 - 2.0 * (y * y + z * z)
    c2 = 2.0 * (x * y + w * z)
    if math.hypot(c1, c2) < EPS_SING:
        raise GimbalLockError("ZYX yaw undefined at +/-90 degree pitch")
    return math.atan2(c2, c1)


def zyx_pitch_roll(q):
    """(pitch, roll) of the Z-Y'-X'' Euler decomposition of q."""
    q = _as_quat(q)
    w, x, y, z = q
    s = 2.0 * (w * y - x * z)
    pitch = math.asin(min(1.0, max(-1.0, s)))
    roll = math.atan2(2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y))
    return pitch, roll


def remove_fused_yaw(q):
    """The tilt-only part of q: normalize((w, 0, 0, -z) * q).

    The result has zero fused yaw, and composing z_rotation(fused_yaw(q))
    with it recovers +/-q.
    """
    q = _as_quat(q)
    w, z = q[0], q[3]
    if w * w + z * z <= 0.25 * EPS_SING * EPS_SING:
        raise SingularOrientationError("fused yaw undefined: body is upside down")
    out = np.array(_k.quat_mult(w, 0.0, 0.0, -z, q[0], q[1], q[2], q[3]))
    return quat_normalize(out)

"""Simulation harness: ground truth, sensor synthesis, and oracles.

Everything here is deterministic given a seed, and implemented in plain
numpy so it stays independent of the compiled filter kernels it is used to
validate.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from .errors import SingularOrientationError
from .rotation import quat_from_axis_angle, quat_identity, wrap_angle

DEFAULT_GYRO_SIGMA = 0.02  # rad/s
DEFAULT_ACC_SIGMA = 0.1  # m/s^2
DEFAULT_MAG_SIGMA = 0.02  # normalized units


@dataclass(frozen=True)
class Trajectory:
    """Ground-truth attitude samples at a fixed rate.

    quat rows are sign-continuous (no antipodal flips between samples);
    omega rows are body-frame angular velocity.
    """

    rate: float
    t: np.ndarray
    quat: np.ndarray
    omega: np.ndarray


@dataclass(frozen=True)
class FaultWindow:
    """Override one channel with a fixed value for t in [t_start, t_end)."""

    t_start: float
    t_end: float
    channel: str  # 'gyro' | 'acc' | 'mag'
    value: tuple = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class SensorDefects:
    gyro_bias: tuple = (0.0, 0.0, 0.0)
    gyro_sigma: float = 0.0
    acc_bias: tuple = (0.0, 0.0, 0.0)
    acc_sigma: float = 0.0
    mag_bias: tuple = (0.0, 0.0, 0.0)
    mag_sigma: float = 0.0
    faults: tuple = ()
    seed: int = 0


def standard_defects(seed=0, gyro_bias=(0.0, 0.0, 0.0), faults=()):
    """The default noisy-sensor scenario used by the acceptance suite."""
    return SensorDefects(gyro_bias=gyro_bias, gyro_sigma=DEFAULT_GYRO_SIGMA,
                         acc_sigma=DEFAULT_ACC_SIGMA, mag_sigma=DEFAULT_MAG_SIGMA,
                         faults=tuple(faults), seed=seed)


def _quat_mult_np(a, b):
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)


def _rotate_np(q, v):
    """Rotate vectors v (broadcastable (...,3)) by quaternions q (...,4)."""
    qv = q[..., 1:]
    w = q[..., :1]
    t = 2.0 * np.cross(qv, v)
    return v + w * t + np.cross(qv, t)


def _enforce_continuity(quat):
    dots = np.sum(quat[1:] * quat[:-1], axis=1)
    flips = np.cumprod(np.where(dots < 0.0, -1.0, 1.0))
    quat[1:] *= flips[:, None]
    return quat


def _time_grid(duration, rate):
    if not (duration > 0.0 and rate > 0.0):
        raise ValueError("duration and rate must be positive")
    n = int(round(duration * rate))
    return np.arange(n) / rate


def static_trajectory(q0=None, duration=10.0, rate=100.0):
    t = _time_grid(duration, rate)
    q0 = quat_identity() if q0 is None else np.asarray(q0, dtype=float)
    quat = np.tile(q0, (t.size, 1))
    return Trajectory(rate, t, quat, np.zeros((t.size, 3)))


def step_trajectory(q0, q1, t_step, duration=10.0, rate=100.0):
    """Discontinuous switch from q0 to q1 at t_step; omega stays zero."""
    t = _time_grid(duration, rate)
    quat = np.where((t >= t_step)[:, None], np.asarray(q1, float),
                    np.asarray(q0, float))
    return Trajectory(rate, t, quat, np.zeros((t.size, 3)))


def const_rate_trajectory(omega, duration=10.0, rate=100.0):
    """Exact exponential of a constant body angular velocity."""
    omega = np.asarray(omega, dtype=float)
    t = _time_grid(duration, rate)
    n = np.linalg.norm(omega)
    if n < 1e-15:
        quat = np.tile(quat_identity(), (t.size, 1))
    else:
        half = 0.5 * n * t
        axis = omega / n
        quat = np.empty((t.size, 4))
        quat[:, 0] = np.cos(half)
        quat[:, 1:] = np.sin(half)[:, None] * axis
    return Trajectory(rate, t, quat,
                      np.tile(omega, (t.size, 1)))


def sinusoid_trajectory(axis, amplitude, freq, duration=10.0, rate=100.0):
    """Oscillation about a fixed axis: angle = amplitude sin(2 pi f t)."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    t = _time_grid(duration, rate)
    ang = amplitude * np.sin(2.0 * math.pi * freq * t)
    dang = amplitude * 2.0 * math.pi * freq * np.cos(2.0 * math.pi * freq * t)
    quat = np.empty((t.size, 4))
    quat[:, 0] = np.cos(0.5 * ang)
    quat[:, 1:] = np.sin(0.5 * ang)[:, None] * axis
    return Trajectory(rate, t, quat, dang[:, None] * axis)


def tumble_trajectory(seed=0, duration=10.0, rate=100.0, intensity=1.0,
                      substeps=10):
    """Smooth pseudo-random motion: per-axis sums of sinusoids, integrated.

    The quaternion is integrated from omega with midpoint exponential steps
    at `substeps` x the sample rate, so it is kinematically consistent with
    omega to well below the estimator's own truncation error.
    """
    rng = np.random.default_rng(seed)
    n_terms = 3
    amp = intensity * rng.uniform(0.2, 0.8, size=(3, n_terms))
    frq = rng.uniform(0.05, 0.4, size=(3, n_terms))
    phs = rng.uniform(0.0, 2.0 * math.pi, size=(3, n_terms))

    def omega_at(tt):
        arg = 2.0 * math.pi * frq * tt + phs
        return np.sum(amp * np.sin(arg), axis=1)

    t = _time_grid(duration, rate)
    quat = np.empty((t.size, 4))
    omega = np.empty((t.size, 3))
    q = quat_identity()
    h = 1.0 / (rate * substeps)
    tt = 0.0
    for i in range(t.size):
        quat[i] = q
        omega[i] = omega_at(t[i])
        for _ in range(substeps):
            w = omega_at(tt + 0.5 * h)
            ang = np.linalg.norm(w) * h
            if ang > 0.0:
                q = _quat_mult_np(q, quat_from_axis_angle(w, ang))
                q = q / np.linalg.norm(q)
            tt += h
    return Trajectory(rate, t, _enforce_continuity(quat), omega)


_KINDS = {
    "static": lambda duration, rate, **kw: static_trajectory(
        kw.get("q0"), duration, rate),
    "step": lambda duration, rate, **kw: step_trajectory(
        kw.get("q0", quat_identity()), kw["q1"], kw.get("t_step", 1.0),
        duration, rate),
    "const_rate": lambda duration, rate, **kw: const_rate_trajectory(
        kw["omega"], duration, rate),
    "sinusoid": lambda duration, rate, **kw: sinusoid_trajectory(
        kw.get("axis", (0.0, 1.0, 0.0)), kw.get("amplitude", 0.5),
        kw.get("freq", 0.2), duration, rate),
    "tumble": lambda duration, rate, **kw: tumble_trajectory(
        kw.get("seed", 0), duration, rate, kw.get("intensity", 1.0)),
}


def generate_trajectory(kind, duration, rate, **kwargs):
    if kind not in _KINDS:
        raise ValueError(f"unknown trajectory kind {kind!r}; "
                         f"choose from {sorted(_KINDS)}")
    return _KINDS[kind](duration, rate, **kwargs)


def synthesize_frames(traj, defects, mag_reference=(1.0, 0.0, 0.0), g=9.81,
                      mag_mode=_k.MAG_FULL, acc_mode=_k.ACC_FULL):
    """Measurement array in the runner's (N, 12) frame layout.

    gyro = omega + bias + noise; acc and mag are the global gravity and
    field vectors rotated into the body frame, plus bias and noise. Fault
    windows then override whole channels. Identical seeds give bit-identical
    output; the three channels use independent noise streams.
    """
    rng = np.random.default_rng(defects.seed)
    n = traj.t.size
    qc = traj.quat.copy()
    qc[:, 1:] *= -1.0  # conjugates: rotate global vectors into the body
    gyro = traj.omega + np.asarray(defects.gyro_bias, float)
    gyro = gyro + defects.gyro_sigma * rng.standard_normal((n, 3))
    acc = _rotate_np(qc, np.array([0.0, 0.0, -g]))
    acc = acc + np.asarray(defects.acc_bias, float)
    acc = acc + defects.acc_sigma * rng.standard_normal((n, 3))
    mag = _rotate_np(qc, np.asarray(mag_reference, float))
    mag = mag + np.asarray(defects.mag_bias, float)
    mag = mag + defects.mag_sigma * rng.standard_normal((n, 3))
    for fw in defects.faults:
        sel = (traj.t >= fw.t_start) & (traj.t < fw.t_end)
        val = np.asarray(fw.value, float)
        if fw.channel == "gyro":
            gyro[sel] = val
        elif fw.channel == "acc":
            acc[sel] = val
        elif fw.channel == "mag":
            mag[sel] = val
        else:
            raise ValueError(f"unknown fault channel {fw.channel!r}")
    frames = np.zeros((n, _k.F_SIZE))
    frames[:, _k.F_T] = traj.t
    frames[:, _k.F_G:_k.F_G + 3] = gyro
    frames[:, _k.F_A:_k.F_A + 3] = acc
    frames[:, _k.F_ACC_MODE] = acc_mode
    frames[:, _k.F_MAG_MODE] = mag_mode
    frames[:, _k.F_M:_k.F_M + 3] = mag
    return frames


def oracle_fused_yaw(q):
    """Constructive fused yaw: build the tilt rotation, then measure x.

    Deliberately follows the geometric definition (axis-angle tilt about
    z_B x z_A) rather than any closed form, so it can serve as an
    independent oracle for the rotation module.
    """
    q = np.asarray(q, dtype=float)
    w, x, y, z = q
    # body z-axis in global coordinates (third column of the matrix)
    zb = np.array([2.0 * (x * z + w * y), 2.0 * (y * z - w * x),
                   1.0 - 2.0 * (x * x + y * y)])
    c = zb[2]  # cos(tilt angle) = zb . e_z
    if c <= -1.0 + 1e-12:
        raise SingularOrientationError("constructive fused yaw undefined")
    axis = np.array([zb[1], -zb[0], 0.0])  # zb x e_z
    an = np.linalg.norm(axis)
    if an < 1e-15:
        qc = q  # z axes already parallel: C = B
    else:
        tilt = quat_from_axis_angle(axis / an, math.acos(max(-1.0, min(1.0, c))))
        qc = _quat_mult_np(tilt, q)
    # x-axis of C in global coordinates
    cw, cx, cy, cz = qc
    xc = np.array([1.0 - 2.0 * (cy * cy + cz * cz), 2.0 * (cx * cy + cw * cz)])
    return wrap_angle(math.atan2(xc[1], xc[0]))


def linear_1d_filter(omega_y, theta_y, kp, ki, dt, theta0=0.0, bias0=0.0):
    """Single-axis linear complementary filter baseline.

    Integrates the angle/bias PI loop with forward Euler steps and returns
    the angle estimate trace.
    """
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    omega_y = np.asarray(omega_y, dtype=float)
    theta_y = np.asarray(theta_y, dtype=float)
    theta = theta0
    bias = bias0
    out = np.empty(omega_y.size)
    for i in range(omega_y.size):
        err = theta_y[i] - theta
        theta += dt * ((omega_y[i] - bias) + kp * err)
        bias += dt * (-ki * err)
        out[i] = theta
    return out


def attitude_error_angle(q_a, q_b):
    """Geodesic distance 2 acos(|<q_a, q_b>|), sign-agnostic, in [0, pi].

    Accepts single quaternions or (N, 4) stacks (broadcasting).
    """
    q_a = np.asarray(q_a, dtype=float)
    q_b = np.asarray(q_b, dtype=float)
    d = np.abs(np.sum(q_a * q_b, axis=-1))
    return 2.0 * np.arccos(np.clip(d, -1.0, 1.0))


def tilt_error_angle(q_a, q_b):
    """Rotation angle between q_a and q_b after ignoring fused yaw.

    The relative rotation's fused yaw is removed before measuring the
    angle, so open-loop yaw drift does not contribute. Array-friendly.
    """
    q_a = np.atleast_2d(np.asarray(q_a, dtype=float))
    q_b = np.atleast_2d(np.asarray(q_b, dtype=float))
    # The relative rotation must be taken in the global frame (q_a * q_b^-1):
    # fused yaw is a rotation about the *global* z axis, so only this
    # composition makes "zero tilt error" equivalent to "same up direction".
    qc = q_b.copy()
    qc[:, 1:] *= -1.0
    rel = _quat_mult_np(q_a, qc)
    w, x, y, z = rel[..., 0], rel[..., 1], rel[..., 2], rel[..., 3]
    # After removing the fused yaw (w,0,0,-z)*rel, the scalar part is
    # sqrt(w^2+z^2) up to normalization by the same quantity's norm.
    s = np.sqrt(w * w + z * z)
    n = np.sqrt(w * w + x * x + y * y + z * z)
    ang = 2.0 * np.arccos(np.clip(s / np.maximum(n, 1e-300), 0.0, 1.0))
    return ang if ang.size > 1 else float(ang[0])

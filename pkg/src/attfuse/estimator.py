"""The passive complementary filter.

State snapshots are immutable; ``update`` returns a new state. One
estimator stream must be updated serially, but independent states may be
advanced concurrently and snapshots may cross thread boundaries freely.
"""

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as _k
from . import rotation
from .errors import ConfigError, SingularOrientationError
from .resolution import ResolutionMethod, ResolutionPath
from .sensors import Calibration, MagMode, SensorFrame


@dataclass(frozen=True)
class FilterConfig:
    """Gains and modes of one estimator instance.

    Gains are 1/s. The default gain values are library defaults tuned to be
    non-oscillatory yet responsive under the standard simulation noise; they
    are not canonical. ``bias_clamp`` bounds each gyro-bias component to
    +/- its value (rad/s) to limit integrator wind-up under sustained
    sensor faults; pass None for the exact unclamped dynamics.
    """

    kp_nom: float = 2.20
    ki_nom: float = 2.65
    kp_quick: float = 10.0
    ki_quick: float = 1.25
    quick_learn_time: float = 3.0
    nominal_dt: float = 0.01
    dt_coercion: tuple = (0.8, 2.2)
    method: ResolutionMethod = ResolutionMethod.FUSED_YAW
    mag_fallback: ResolutionMethod = ResolutionMethod.FUSED_YAW
    calibration: Calibration = field(default_factory=Calibration)
    quick_learn_on_start: bool = True
    bias_clamp: float | None = 1.0

    def validate(self):
        for name in ("kp_nom", "ki_nom", "kp_quick", "ki_quick"):
            if getattr(self, name) < 0.0:
                raise ConfigError(f"{name} must be >= 0")
        if not self.quick_learn_time > 0.0:
            raise ConfigError("quick_learn_time must be > 0")
        if not self.nominal_dt > 0.0:
            raise ConfigError("nominal_dt must be > 0")
        lo, hi = self.dt_coercion
        if not (0.0 < lo <= hi):
            raise ConfigError("dt_coercion must satisfy 0 < low <= high")
        if self.mag_fallback == ResolutionMethod.MAGNETOMETER:
            raise ConfigError("mag_fallback must be a yaw method")
        if self.bias_clamp is not None and not self.bias_clamp > 0.0:
            raise ConfigError("bias_clamp must be positive (or None)")

    def to_array(self):
        cfg = np.zeros(_k.CFG_SIZE)
        cfg[_k.CFG_KP_NOM] = self.kp_nom
        cfg[_k.CFG_KI_NOM] = self.ki_nom
        cfg[_k.CFG_KP_QUICK] = self.kp_quick
        cfg[_k.CFG_KI_QUICK] = self.ki_quick
        cfg[_k.CFG_QL_TIME] = self.quick_learn_time
        cfg[_k.CFG_NOM_DT] = self.nominal_dt
        cfg[_k.CFG_COERCE_LO] = self.dt_coercion[0]
        cfg[_k.CFG_COERCE_HI] = self.dt_coercion[1]
        cfg[_k.CFG_METHOD] = int(self.method)
        cfg[_k.CFG_MAG_FALLBACK] = int(self.mag_fallback)
        cfg[_k.CFG_MEX] = self.calibration.mag_reference[0]
        cfg[_k.CFG_MEY] = self.calibration.mag_reference[1]
        cfg[_k.CFG_GRAVITY] = self.calibration.gravity
        cfg[_k.CFG_ACC_BIAS:_k.CFG_ACC_BIAS + 3] = self.calibration.acc_bias
        cfg[_k.CFG_MAG_BIAS:_k.CFG_MAG_BIAS + 3] = self.calibration.mag_bias
        cfg[_k.CFG_BIAS_CLAMP] = math.inf if self.bias_clamp is None else self.bias_clamp
        return cfg


@dataclass(frozen=True)
class EstimatorState:
    """Immutable snapshot of the filter between updates."""

    config: FilterConfig
    quat: np.ndarray
    bias: np.ndarray
    fade: float  # lambda in [0, 1]; 0 = quick gains, 1 = nominal gains
    quick_active: bool
    last_error_feedback: np.ndarray
    last_omega: np.ndarray
    last_rate: np.ndarray
    have_last: bool
    last_dt: float
    last_path: ResolutionPath | None = None
    last_flags: int = 0

    def to_array(self):
        st = np.zeros(_k.ST_SIZE)
        st[_k.ST_Q:_k.ST_Q + 4] = self.quat
        st[_k.ST_B:_k.ST_B + 3] = self.bias
        st[_k.ST_LAMBDA] = self.fade
        st[_k.ST_QUICK] = 1.0 if self.quick_active else 0.0
        st[_k.ST_LAST_OE:_k.ST_LAST_OE + 3] = self.last_error_feedback
        st[_k.ST_LAST_W:_k.ST_LAST_W + 3] = self.last_omega
        st[_k.ST_LAST_RATE:_k.ST_LAST_RATE + 4] = self.last_rate
        st[_k.ST_HAVE_LAST] = 1.0 if self.have_last else 0.0
        st[_k.ST_LAST_DT] = self.last_dt
        return st

    @classmethod
    def from_array(cls, config, st, path=None, flags=0):
        p = None if path is None or path < 0 else ResolutionPath(int(path))
        return cls(
            config=config,
            quat=st[_k.ST_Q:_k.ST_Q + 4].copy(),
            bias=st[_k.ST_B:_k.ST_B + 3].copy(),
            fade=float(st[_k.ST_LAMBDA]),
            quick_active=st[_k.ST_QUICK] != 0.0,
            last_error_feedback=st[_k.ST_LAST_OE:_k.ST_LAST_OE + 3].copy(),
            last_omega=st[_k.ST_LAST_W:_k.ST_LAST_W + 3].copy(),
            last_rate=st[_k.ST_LAST_RATE:_k.ST_LAST_RATE + 4].copy(),
            have_last=st[_k.ST_HAVE_LAST] != 0.0,
            last_dt=float(st[_k.ST_LAST_DT]),
            last_path=p,
            last_flags=int(flags),
        )


def create(config=None):
    """Fresh estimator state: identity attitude, zero bias."""
    config = config or FilterConfig()
    config.validate()
    quick = config.quick_learn_on_start
    return EstimatorState(
        config=config,
        quat=rotation.quat_identity(),
        bias=np.zeros(3),
        fade=0.0 if quick else 1.0,
        quick_active=quick,
        last_error_feedback=np.zeros(3),
        last_omega=np.zeros(3),
        last_rate=np.zeros(4),
        have_last=False,
        last_dt=config.nominal_dt,
    )


def _frame_floats(frame):
    if frame.acc is None:
        acc_mode = _k.ACC_ABSENT
        ax = ay = az = 0.0
    else:
        acc_mode = _k.ACC_FULL if frame.acc_z_valid else _k.ACC_XY
        ax, ay, az = frame.acc
    mode = int(frame.mag_mode)
    if frame.mag_mode == MagMode.HEADING:
        m0, m1, m2 = frame.heading, 0.0, 0.0
    elif frame.mag is None or frame.mag_mode == MagMode.ABSENT:
        mode = _k.MAG_ABSENT
        m0 = m1 = m2 = 0.0
    else:
        m0, m1, m2 = frame.mag
    return ax, ay, az, acc_mode, mode, m0, m1, m2


def update(state, dt_measured, frame):
    """Advance the filter by one sensor frame; returns the new state.

    Sensor degeneracies never raise: a frame without a usable up vector
    degrades to pure gyro integration for that cycle.
    """
    if not dt_measured > 0.0:
        raise ValueError("dt_measured must be positive")
    gx, gy, gz = (float(c) for c in frame.gyro)
    ax, ay, az, acc_mode, mag_mode, m0, m1, m2 = _frame_floats(frame)
    st = state.to_array()
    path, flags = _k.filter_step(
        st, state.config.to_array(), float(dt_measured),
        gx, gy, gz, ax, ay, az, acc_mode, mag_mode, m0, m1, m2)
    return EstimatorState.from_array(state.config, st, path, flags)


def trigger_quick_learning(state):
    """Restart the gain fade at the quick end; may be called at any time."""
    return replace(state, fade=0.0, quick_active=True)


def stable_output(state):
    """Attitude with the fused yaw removed (drift-free output for mag-free runs).

    At the fused-yaw singularity the raw estimate is returned unchanged and
    a warning is emitted.
    """
    try:
        return rotation.remove_fused_yaw(state.quat)
    except SingularOrientationError:
        warnings.warn("attitude at fused-yaw singularity; returning raw estimate",
                      RuntimeWarning, stacklevel=2)
        return np.asarray(state.quat, dtype=float).copy()


def attitude(state):
    return state.quat.copy()


def gyro_bias(state):
    return state.bias.copy()


def active_gains(state):
    """(kp, ki) that the next update will apply."""
    lam = state.fade
    c = state.config
    return (lam * c.kp_nom + (1.0 - lam) * c.kp_quick,
            lam * c.ki_nom + (1.0 - lam) * c.ki_quick)


def yaw_pitch_roll(state):
    """(fused yaw, ZYX pitch, ZYX roll) summary of the attitude."""
    pitch, roll = rotation.zyx_pitch_roll(state.quat)
    try:
        yaw = rotation.fused_yaw(state.quat)
    except SingularOrientationError:
        yaw = math.nan
    return yaw, pitch, roll


def make_frame(t, gyro, acc=None, mag=None, mag_mode=None, heading=0.0,
               acc_z_valid=True):
    """Convenience SensorFrame constructor with mode inference."""
    if mag_mode is None:
        mag_mode = MagMode.ABSENT if mag is None else MagMode.FULL_3D
    return SensorFrame(t=t, gyro=np.asarray(gyro, dtype=float),
                       acc=None if acc is None else np.asarray(acc, dtype=float),
                       acc_z_valid=acc_z_valid,
                       mag=None if mag is None else np.asarray(mag, dtype=float),
                       mag_mode=mag_mode, heading=heading)

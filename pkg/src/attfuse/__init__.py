"""attfuse: quaternion attitude estimation with robust yaw resolution."""

from .errors import (
    AttfuseError,
    ConfigError,
    DegenerateInputError,
    GimbalLockError,
    SingularOrientationError,
)
from .estimator import (
    EstimatorState,
    FilterConfig,
    active_gains,
    attitude,
    create,
    gyro_bias,
    make_frame,
    stable_output,
    trigger_quick_learning,
    update,
    yaw_pitch_roll,
)
from .resolution import (
    ResolutionMethod,
    ResolutionOutcome,
    ResolutionPath,
    resolve_fused_yaw,
    resolve_magnetometer,
    resolve_zyx_yaw,
)
from .rotation import (
    fused_yaw,
    matrix_to_quat,
    quat_conjugate,
    quat_from_axis_angle,
    quat_identity,
    quat_multiply,
    quat_normalize,
    quat_to_matrix,
    remove_fused_yaw,
    rotate_vector,
    wrap_angle,
    z_rotation,
    zyx_pitch_roll,
    zyx_yaw,
)
from .sensors import (
    Calibration,
    MagMode,
    SensorFrame,
    acc_to_up_vector,
    mag_to_unit,
    reconstruct_acc_z,
    unbias_gyro,
)

__version__ = "0.1.0"

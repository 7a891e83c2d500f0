"""CSV schemas for sensor logs and estimator output.

Input log schema (one frame per row):

    t,gx,gy,gz,ax,ay,az,mx,my,mz

Units: s, rad/s, m/s^2, arbitrary consistent field units. An empty cell
marks that channel absent for the frame: an empty az with ax/ay present
selects two-axis accelerometer mode; an empty my/mz with mx present makes
mx a heading angle in radians; all of mx/my/mz empty means no magnetometer.
Lines starting with '#' are comments. Numbers are written with 9
significant digits and NaN is spelled `nan`, so written logs round-trip.
"""

import numpy as np

from . import _kernels as _k
from .errors import AttfuseError

HEADER = "t,gx,gy,gz,ax,ay,az,mx,my,mz"


class ParseError(AttfuseError):
    def __init__(self, message, line=None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


def _fmt(v):
    return f"{v:.9g}"


def write_frames_csv(path, frames):
    """Write a runner-format (N, 12) frame array as a sensor log."""
    frames = np.asarray(frames, dtype=float)
    with open(path, "w") as fh:
        fh.write(HEADER + "\n")
        for row in frames:
            cells = [_fmt(row[_k.F_T])]
            cells += [_fmt(row[_k.F_G + i]) for i in range(3)]
            acc_mode = int(row[_k.F_ACC_MODE])
            if acc_mode == _k.ACC_ABSENT:
                cells += ["", "", ""]
            elif acc_mode == _k.ACC_XY:
                cells += [_fmt(row[_k.F_A]), _fmt(row[_k.F_A + 1]), ""]
            else:
                cells += [_fmt(row[_k.F_A + i]) for i in range(3)]
            mag_mode = int(row[_k.F_MAG_MODE])
            if mag_mode == _k.MAG_ABSENT:
                cells += ["", "", ""]
            elif mag_mode == _k.MAG_HEADING:
                cells += [_fmt(row[_k.F_M]), "", ""]
            elif mag_mode == _k.MAG_XY:
                cells += [_fmt(row[_k.F_M]), _fmt(row[_k.F_M + 1]), ""]
            else:
                cells += [_fmt(row[_k.F_M + i]) for i in range(3)]
            fh.write(",".join(cells) + "\n")


def _cell(cells, idx, lineno):
    s = cells[idx].strip()
    if not s:
        return None
    try:
        return float(s)
    except ValueError:
        raise ParseError(f"bad number {s!r} in column {idx + 1}", lineno) from None


def read_frames_csv(path):
    """Parse a sensor log into the runner's (N, 12) frame array."""
    rows = []
    last_t = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.replace(" ", "").lower().startswith("t,g"):
                continue  # header
            cells = line.split(",")
            if len(cells) != 10:
                raise ParseError(f"expected 10 columns, got {len(cells)}", lineno)
            vals = [_cell(cells, i, lineno) for i in range(10)]
            if any(vals[i] is None for i in range(4)):
                raise ParseError("t and gyro columns must be present", lineno)
            t = vals[0]
            if last_t is not None and t <= last_t:
                raise ParseError("timestamps must be strictly increasing", lineno)
            last_t = t
            row = np.zeros(_k.F_SIZE)
            row[_k.F_T] = t
            row[_k.F_G:_k.F_G + 3] = vals[1:4]
            ax, ay, az = vals[4], vals[5], vals[6]
            if ax is None or ay is None:
                row[_k.F_ACC_MODE] = _k.ACC_ABSENT
            elif az is None:
                row[_k.F_ACC_MODE] = _k.ACC_XY
                row[_k.F_A:_k.F_A + 2] = (ax, ay)
            else:
                row[_k.F_ACC_MODE] = _k.ACC_FULL
                row[_k.F_A:_k.F_A + 3] = (ax, ay, az)
            mx, my, mz = vals[7], vals[8], vals[9]
            if mx is None:
                row[_k.F_MAG_MODE] = _k.MAG_ABSENT
            elif my is None:
                row[_k.F_MAG_MODE] = _k.MAG_HEADING
                row[_k.F_M] = mx
            elif mz is None:
                row[_k.F_MAG_MODE] = _k.MAG_XY
                row[_k.F_M:_k.F_M + 2] = (mx, my)
            else:
                row[_k.F_MAG_MODE] = _k.MAG_FULL
                row[_k.F_M:_k.F_M + 3] = (mx, my, mz)
            rows.append(row)
    if not rows:
        raise ParseError("no data rows in input")
    return np.vstack(rows)


def downgrade_mag(frames, mode):
    """Apply a --mag-mode override: 3d -> xy -> heading -> none.

    Heading is derived from the planar field direction when downgrading to
    heading mode.
    """
    frames = frames.copy()
    if mode == "3d":
        return frames
    for row in frames:
        m = int(row[_k.F_MAG_MODE])
        if mode == "none":
            row[_k.F_MAG_MODE] = _k.MAG_ABSENT
        elif mode == "xy" and m == _k.MAG_FULL:
            row[_k.F_MAG_MODE] = _k.MAG_XY
            row[_k.F_M + 2] = 0.0
        elif mode == "heading" and m in (_k.MAG_FULL, _k.MAG_XY):
            row[_k.F_MAG_MODE] = _k.MAG_HEADING
            row[_k.F_M] = np.arctan2(row[_k.F_M + 1], row[_k.F_M])
            row[_k.F_M + 1] = 0.0
            row[_k.F_M + 2] = 0.0
    return frames


def downgrade_acc(frames, mode):
    """Apply an --acc-mode override: 3d -> xy."""
    if mode == "3d":
        return frames
    frames = frames.copy()
    sel = frames[:, _k.F_ACC_MODE] == _k.ACC_FULL
    frames[sel, _k.F_ACC_MODE] = _k.ACC_XY
    frames[sel, _k.F_A + 2] = 0.0
    return frames

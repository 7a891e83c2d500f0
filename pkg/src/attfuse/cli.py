"""Command-line front end: replay, simulate, bench.

Exit codes: 0 success, 1 runtime failure, 2 usage or parse error.
"""

import argparse
import math
import shlex
import sys

import numpy as np

from . import _kernels as _k
from . import csvio, runner, simulate
from .errors import AttfuseError
from .estimator import FilterConfig, create, trigger_quick_learning
from .resolution import ResolutionMethod
from .sensors import Calibration

_METHODS = {"mag": ResolutionMethod.MAGNETOMETER,
            "zyx": ResolutionMethod.ZYX_YAW,
            "fused": ResolutionMethod.FUSED_YAW}

REPLAY_HEADER = ("label,t,qw,qx,qy,qz,fused_yaw,zyx_yaw,pitch,roll,"
                 "bias_x,bias_y,bias_z,lambda,path")
SIM_HEADER = REPLAY_HEADER + ",truth_qw,truth_qx,truth_qy,truth_qz,error_angle"


def _fmt(v):
    return f"{float(v):.9g}"


def _parse_pair(s):
    parts = [float(p) for p in s.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected two comma-separated numbers")
    return tuple(parts)


def _parse_triple(s):
    parts = [float(p) for p in s.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated numbers")
    return tuple(parts)


def _estimator_flags(parser):
    parser.add_argument("--method", choices=_METHODS, default="fused")
    parser.add_argument("--kp", type=float, default=None)
    parser.add_argument("--ki", type=float, default=None)
    parser.add_argument("--kp-quick", type=float, default=None)
    parser.add_argument("--ki-quick", type=float, default=None)
    parser.add_argument("--ql-time", type=float, default=None)
    parser.add_argument("--nominal-dt", type=float, default=None)
    parser.add_argument("--mag-ref", type=_parse_pair, default=None,
                        help="global magnetic reference x,y")
    parser.add_argument("--mag-fallback", choices=("zyx", "fused"), default="fused")
    parser.add_argument("--acc-mode", choices=("3d", "xy"), default="3d")
    parser.add_argument("--mag-mode", choices=("3d", "xy", "heading", "none"),
                        default="3d")
    parser.add_argument("--no-ql-on-start", action="store_true")
    parser.add_argument("--ql-trigger", type=float, default=None,
                        help="re-trigger quick learning at this time (s)")
    parser.add_argument("--bias-clamp", type=float, default=1.0,
                        help="gyro bias clamp in rad/s; <= 0 disables")


def _config_from_ns(ns, nominal_dt_default):
    kw = {}
    if ns.kp is not None:
        kw["kp_nom"] = ns.kp
    if ns.ki is not None:
        kw["ki_nom"] = ns.ki
    if ns.kp_quick is not None:
        kw["kp_quick"] = ns.kp_quick
    if ns.ki_quick is not None:
        kw["ki_quick"] = ns.ki_quick
    if ns.ql_time is not None:
        kw["quick_learn_time"] = ns.ql_time
    kw["nominal_dt"] = ns.nominal_dt if ns.nominal_dt is not None else nominal_dt_default
    kw["method"] = _METHODS[ns.method]
    kw["mag_fallback"] = _METHODS[ns.mag_fallback]
    if ns.mag_ref is not None:
        kw["calibration"] = Calibration(mag_reference=ns.mag_ref)
    kw["quick_learn_on_start"] = not ns.no_ql_on_start
    kw["bias_clamp"] = None if ns.bias_clamp <= 0.0 else ns.bias_clamp
    return FilterConfig(**kw)


class _EstimatorSpec:
    def __init__(self, label, config, acc_mode, mag_mode, ql_trigger):
        self.label = label
        self.config = config
        self.acc_mode = acc_mode
        self.mag_mode = mag_mode
        self.ql_trigger = ql_trigger


def _parse_estimators(specs, nominal_dt_default, parent):
    sub = argparse.ArgumentParser(prog="--estimator", add_help=False)
    _estimator_flags(sub)
    out = []
    labels = set()
    for raw in specs:
        label, _, flagset = raw.partition(":")
        label = label.strip()
        if not label:
            parent.error(f"estimator spec needs a label: {raw!r}")
        if label in labels:
            parent.error(f"duplicate estimator label {label!r}")
        labels.add(label)
        try:
            ns = sub.parse_args(shlex.split(flagset))
        except SystemExit:
            parent.error(f"bad estimator flags for {label!r}")
        out.append(_EstimatorSpec(label, _config_from_ns(ns, nominal_dt_default),
                                  ns.acc_mode, ns.mag_mode, ns.ql_trigger))
    return out


def _default_estimators(args, nominal_dt_default, parser):
    if args.estimator:
        return _parse_estimators(args.estimator, nominal_dt_default, parser)
    return [_EstimatorSpec("est0", _config_from_ns(args, nominal_dt_default),
                           args.acc_mode, args.mag_mode, args.ql_trigger)]


def _run_instance(spec, frames):
    frames = csvio.downgrade_acc(frames, spec.acc_mode)
    frames = csvio.downgrade_mag(frames, spec.mag_mode)
    if spec.ql_trigger is None:
        out, _ = runner.run_batch(spec.config, frames)
        return out
    split = int(np.searchsorted(frames[:, _k.F_T], spec.ql_trigger))
    state = create(spec.config)
    out1, state = runner.run_batch(spec.config, frames[:split], state)
    state = trigger_quick_learning(state)
    out2, _ = runner.run_batch(spec.config, frames[split:], state)
    return np.vstack([out1, out2]) if split else out2


def _yaw_columns(q):
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    fy = np.arctan2(z, w) * 2.0
    fy = np.where(fy > math.pi, fy - 2.0 * math.pi,
                  np.where(fy <= -math.pi, fy + 2.0 * math.pi, fy))
    fy = np.where(w * w + z * z <= 0.25 * _k.EPS_SING ** 2, math.nan, fy)
    c1 = 1.0 - 2.0 * (y * y + z * z)
    c2 = 2.0 * (x * y + w * z)
    zy = np.where(np.hypot(c1, c2) < _k.EPS_SING, math.nan, np.arctan2(c2, c1))
    pitch = np.arcsin(np.clip(2.0 * (w * y - x * z), -1.0, 1.0))
    roll = np.arctan2(2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y))
    return fy, zy, pitch, roll


def _emit_rows(fh, label, t, out, truth=None):
    q = out[:, 0:4]
    fy, zy, pitch, roll = _yaw_columns(q)
    if truth is not None:
        err = simulate.attitude_error_angle(truth, q)
    for i in range(out.shape[0]):
        cells = [label, _fmt(t[i])]
        cells += [_fmt(v) for v in q[i]]
        cells += [_fmt(fy[i]), _fmt(zy[i]), _fmt(pitch[i]), _fmt(roll[i])]
        cells += [_fmt(v) for v in out[i, 4:7]]
        cells += [_fmt(out[i, 7]), runner.path_name(out[i, 8])]
        if truth is not None:
            cells += [_fmt(v) for v in truth[i]]
            cells.append(_fmt(err[i]))
        fh.write(",".join(cells) + "\n")


def _write_output(path, header, blocks):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for block in blocks:
            _emit_rows(fh, *block)


def cmd_replay(args, parser):
    frames = csvio.read_frames_csv(args.input)
    dts = np.diff(frames[:, _k.F_T])
    nominal = float(np.median(dts)) if dts.size else 0.01
    specs = _default_estimators(args, nominal, parser)
    blocks = [(s.label, frames[:, _k.F_T], _run_instance(s, frames))
              for s in specs]
    _write_output(args.out, REPLAY_HEADER, blocks)
    return 0


_SCENARIOS = ("static", "step", "const-rate", "sinusoid", "tumble", "glitch")


def _build_scenario(args):
    d, r = args.duration, args.rate
    if args.scenario == "static":
        return simulate.static_trajectory(duration=d, rate=r)
    if args.scenario == "step":
        axis = np.array(args.step_axis) / np.linalg.norm(args.step_axis)
        q1 = simulate.quat_from_axis_angle(axis, math.radians(args.step_deg))
        return simulate.step_trajectory(simulate.quat_identity(), q1,
                                        args.step_time, duration=d, rate=r)
    if args.scenario == "const-rate":
        return simulate.const_rate_trajectory(args.omega, duration=d, rate=r)
    if args.scenario == "sinusoid":
        return simulate.sinusoid_trajectory((0.0, 1.0, 0.0), 0.5, 0.2,
                                            duration=d, rate=r)
    if args.scenario in ("tumble", "glitch"):
        return simulate.tumble_trajectory(args.seed, duration=d, rate=r,
                                          intensity=0.5)
    raise ValueError(args.scenario)


def cmd_simulate(args, parser):
    traj = _build_scenario(args)
    faults = []
    if args.scenario == "glitch" and args.mag_fault is None:
        args.mag_fault = (5.0, 5.5)
    if args.mag_fault is not None:
        faults.append(simulate.FaultWindow(args.mag_fault[0], args.mag_fault[1],
                                           "mag", (0.8, -0.5, 0.3)))
    defects = simulate.SensorDefects(
        gyro_bias=args.gyro_bias, gyro_sigma=args.gyro_noise,
        acc_bias=args.acc_bias, acc_sigma=args.acc_noise,
        mag_bias=args.mag_bias, mag_sigma=args.mag_noise,
        faults=tuple(faults), seed=args.seed)
    frames = simulate.synthesize_frames(traj, defects,
                                        mag_reference=(args.mag_ref_sim[0],
                                                       args.mag_ref_sim[1], -0.4))
    specs = _default_estimators(args, 1.0 / args.rate, parser)
    blocks = [(s.label, traj.t, _run_instance(s, frames), traj.quat)
              for s in specs]
    _write_output(args.out, SIM_HEADER, blocks)
    return 0


def cmd_bench(args, parser):
    if args.iterations < 1_000_000:
        parser.error("--iterations must be at least 1000000")
    methods = list(_METHODS) if args.method == "all" else [args.method]
    for name in methods:
        rep = runner.bench_method(_METHODS[name], args.iterations)
        print(f"method={rep['method']} iterations={rep['iterations']} "
              f"mean_ns_per_update={rep['mean_ns_per_update']:.1f} "
              f"updates_per_second={rep['updates_per_second']:.0f}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="attfuse",
        description="Attitude estimation: replay logs, simulate, benchmark.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_replay = sub.add_parser("replay", help="run estimators over a sensor log")
    p_replay.add_argument("--input", required=True)
    p_replay.add_argument("--out", required=True)
    p_replay.add_argument("--estimator", action="append", default=[],
                          metavar="LABEL:FLAGS",
                          help='e.g. --estimator "m:--method mag --kp 2.2"')
    _estimator_flags(p_replay)
    p_replay.set_defaults(func=cmd_replay)

    p_sim = sub.add_parser("simulate", help="synthesize a scenario and estimate")
    p_sim.add_argument("--scenario", choices=_SCENARIOS, required=True)
    p_sim.add_argument("--duration", type=float, default=10.0)
    p_sim.add_argument("--rate", type=float, default=100.0)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--gyro-bias", type=_parse_triple, default=(0.0, 0.0, 0.0))
    p_sim.add_argument("--gyro-noise", type=float, default=0.0)
    p_sim.add_argument("--acc-bias", type=_parse_triple, default=(0.0, 0.0, 0.0))
    p_sim.add_argument("--acc-noise", type=float, default=0.0)
    p_sim.add_argument("--mag-bias", type=_parse_triple, default=(0.0, 0.0, 0.0))
    p_sim.add_argument("--mag-noise", type=float, default=0.0)
    p_sim.add_argument("--mag-fault", type=_parse_pair, default=None,
                       metavar="T0,T1")
    p_sim.add_argument("--mag-ref-sim", type=_parse_pair, default=(1.0, 0.0),
                       help="simulated global field x,y")
    p_sim.add_argument("--step-deg", type=float, default=90.0)
    p_sim.add_argument("--step-time", type=float, default=1.0)
    p_sim.add_argument("--step-axis", type=_parse_triple, default=(1.0, 1.0, 1.0))
    p_sim.add_argument("--omega", type=_parse_triple, default=(0.0, 0.0, 1.0))
    p_sim.add_argument("--estimator", action="append", default=[],
                       metavar="LABEL:FLAGS")
    _estimator_flags(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_bench = sub.add_parser("bench", help="per-update timing report")
    p_bench.add_argument("--method", choices=list(_METHODS) + ["all"],
                         default="all")
    p_bench.add_argument("--iterations", type=int, default=2_000_000)
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except csvio.ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (AttfuseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

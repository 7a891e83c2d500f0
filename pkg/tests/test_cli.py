"""CSV schema and command-line interface."""

import math

import numpy as np
import pytest

from attfuse import _kernels as _k
from attfuse.cli import REPLAY_HEADER, SIM_HEADER, main
from attfuse.csvio import (
    HEADER,
    ParseError,
    read_frames_csv,
    write_frames_csv,
)
from attfuse.simulate import (
    SensorDefects,
    generate_trajectory,
    standard_defects,
    synthesize_frames,
)

RNG = np.random.default_rng(77)


def sample_frames(n=50, mag=True):
    traj = generate_trajectory("tumble", n / 100.0, 100.0, seed=8)
    mode = _k.MAG_FULL if mag else _k.MAG_ABSENT
    return synthesize_frames(traj, standard_defects(seed=8), mag_mode=mode)


# ------------------------------------------------------------------------- csv

def test_round_trip_preserves_frames(tmp_path):
    frames = sample_frames()
    path = tmp_path / "log.csv"
    write_frames_csv(path, frames)
    back = read_frames_csv(path)
    assert back.shape == frames.shape
    # 9 significant digits on the way out.
    assert np.allclose(back, frames, rtol=1e-8, atol=1e-12)
    assert open(path).readline().strip() == HEADER


def test_round_trip_preserves_modes(tmp_path):
    frames = sample_frames()
    frames[3, _k.F_ACC_MODE] = _k.ACC_XY
    frames[5, _k.F_MAG_MODE] = _k.MAG_ABSENT
    frames[7, _k.F_MAG_MODE] = _k.MAG_HEADING
    frames[7, _k.F_M] = 1.25
    path = tmp_path / "log.csv"
    write_frames_csv(path, frames)
    back = read_frames_csv(path)
    assert back[3, _k.F_ACC_MODE] == _k.ACC_XY
    assert back[5, _k.F_MAG_MODE] == _k.MAG_ABSENT
    assert back[7, _k.F_MAG_MODE] == _k.MAG_HEADING
    assert math.isclose(back[7, _k.F_M], 1.25)


def test_comments_and_blank_lines_ignored(tmp_path):
    path = tmp_path / "log.csv"
    path.write_text(HEADER + "\n# a comment\n\n"
                    "0,0,0,0,0,0,-9.81,,,\n"
                    "0.01,0,0,0,0,0,-9.81,,,\n")
    frames = read_frames_csv(path)
    assert frames.shape[0] == 2
    assert frames[0, _k.F_MAG_MODE] == _k.MAG_ABSENT


@pytest.mark.parametrize("body,fragment", [
    ("0,0,0\n", "column"),                             # too few cells
    ("abc,0,0,0,0,0,-9.81,,,\n", "number"),            # non-numeric
    ("1,0,0,0,0,0,-9.81,,,\n0.5,0,0,0,0,0,-9.81,,,\n", "increasing"),
])
def test_parse_errors_carry_line_numbers(tmp_path, body, fragment):
    path = tmp_path / "bad.csv"
    path.write_text(HEADER + "\n" + body)
    with pytest.raises(ParseError) as exc:
        read_frames_csv(path)
    assert fragment in str(exc.value).lower()
    assert exc.value.line is not None


# ------------------------------------------------------------------------- cli

def test_replay_runs_and_writes_output(tmp_path):
    log = tmp_path / "log.csv"
    write_frames_csv(log, sample_frames(100))
    out = tmp_path / "out.csv"
    rc = main(["replay", "--input", str(log), "--out", str(out),
               "--method", "mag"])
    assert rc == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == REPLAY_HEADER
    assert len(lines) == 101


def test_replay_multiple_estimators(tmp_path):
    log = tmp_path / "log.csv"
    write_frames_csv(log, sample_frames(60))
    out = tmp_path / "out.csv"
    rc = main(["replay", "--input", str(log), "--out", str(out),
               "--estimator", "a:--method zyx",
               "--estimator", "b:--method fused --kp 3.0"])
    assert rc == 0
    lines = out.read_text().strip().splitlines()
    labels = {ln.split(",", 1)[0] for ln in lines[1:]}
    assert labels == {"a", "b"}
    assert len(lines) == 121


def test_replay_missing_file_is_runtime_error(tmp_path):
    rc = main(["replay", "--input", str(tmp_path / "nope.csv"),
               "--out", str(tmp_path / "o.csv")])
    assert rc == 1


def test_replay_bad_csv_is_parse_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text(HEADER + "\nnot,a,row\n")
    rc = main(["replay", "--input", str(bad), "--out", str(tmp_path / "o.csv")])
    assert rc == 2


def test_simulate_glitch_scenario(tmp_path):
    out = tmp_path / "sim.csv"
    rc = main(["simulate", "--scenario", "glitch", "--duration", "8",
               "--rate", "50", "--gyro-noise", "0.02", "--out", str(out),
               "--method", "mag"])
    assert rc == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == SIM_HEADER
    assert len(lines) == 401
    # error_angle column is last and finite.
    errs = [float(ln.rsplit(",", 1)[1]) for ln in lines[1:]]
    assert all(math.isfinite(e) for e in errs)


def test_simulate_step_with_ql_trigger(tmp_path):
    out = tmp_path / "sim.csv"
    rc = main(["simulate", "--scenario", "step", "--duration", "6",
               "--rate", "100", "--step-time", "2.0", "--out", str(out),
               "--method", "mag", "--no-ql-on-start", "--ql-trigger", "2.0"])
    assert rc == 0
    lines = out.read_text().strip().splitlines()
    header = lines[0].split(",")
    i_lam = header.index("lambda")
    lam = np.array([float(ln.split(",")[i_lam]) for ln in lines[1:]])
    t = np.array([float(ln.split(",")[1]) for ln in lines[1:]])
    # Fade restarts at the trigger time.
    before = lam[np.searchsorted(t, 1.99)]
    after = lam[np.searchsorted(t, 2.02)]
    assert before > 0.9 and after < 0.1


def test_mag_mode_downgrade_runs(tmp_path):
    log = tmp_path / "log.csv"
    write_frames_csv(log, sample_frames(60))
    out = tmp_path / "out.csv"
    rc = main(["replay", "--input", str(log), "--out", str(out),
               "--method", "mag", "--mag-mode", "heading"])
    assert rc == 0


def test_bench_rejects_small_iteration_count():
    with pytest.raises(SystemExit) as exc:
        main(["bench", "--iterations", "1000"])
    assert exc.value.code == 2


def test_unknown_scenario_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--scenario", "wiggle", "--out",
              str(tmp_path / "x.csv")])
    assert exc.value.code == 2

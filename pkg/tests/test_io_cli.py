"""Serialization round trips and the command-line surface."""
import glob
import json
import os

import numpy as np
import pytest

from mtvf import (
    Euclidean,
    Sphere,
    run_exact_pc,
    scalar_curve,
    tv_measure,
)
from mtvf.cli import main
from mtvf.flows import FlowConfig, run_regularized
from mtvf.io import (
    config_to_text,
    curve_from_text,
    flow_config_from_mapping,
    parse_config_text,
    read_curve,
    read_trajectory,
    reports_to_csv,
    sha256_of,
    write_curve,
    write_manifest,
    write_trajectory,
)
from mtvf.synth import noisy_field, random_rad_curve, two_jump_square
from mtvf.verify import CheckReport, check_energy

SPH = Sphere(3)


# ---------------------------------------------------------------------------
# round trips: every float is printed with 17 significant digits, so a
# write/read cycle must reproduce the same doubles bit for bit
# ---------------------------------------------------------------------------


def test_pc_curve_round_trip_bit_exact(tmp_path):
    u = random_rad_curve(SPH, np.random.Generator(np.random.Philox([60, 0])))
    path = tmp_path / "curve.csv"
    write_curve(str(path), u)
    back = read_curve(str(path))
    assert back.manifold == u.manifold
    assert np.array_equal(back.breakpoints, u.breakpoints)
    assert np.array_equal(back.values, u.values)


def test_sampled_curve_round_trip_bit_exact(tmp_path):
    w = noisy_field("sphere:3", grid_n=64, seed=4)
    path = tmp_path / "field.csv"
    write_curve(str(path), w)
    back = read_curve(str(path))
    assert np.array_equal(back.values, w.values)


def test_exact_trajectory_round_trip(tmp_path):
    u0 = random_rad_curve(Euclidean(2), np.random.Generator(np.random.Philox([61, 0])))
    traj = run_exact_pc(u0, t_max=4 * tv_measure(u0).total)
    tp, dp = str(tmp_path / "t.csv"), str(tmp_path / "d.csv")
    write_trajectory(tp, dp, traj)
    back = read_trajectory(tp, dp)
    assert np.array_equal(back.times, traj.times)
    assert np.array_equal(back.tv, traj.tv)
    assert np.array_equal(back.dissipation, traj.dissipation)
    assert np.array_equal(back.max_jump, traj.max_jump)
    assert np.array_equal(back.stopped, traj.stopped)
    assert back.solver == traj.solver
    assert back.dt_nominal == traj.dt_nominal
    assert back.epsilon is None
    for a, b in zip(back.snapshots, traj.snapshots):
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.breakpoints, b.breakpoints)
    # energy check must still pass on the reloaded run
    assert check_energy(back).passed


def test_regularized_trajectory_round_trip_keeps_epsilon(tmp_path):
    w = noisy_field("circle", grid_n=48, noise=0.05, seed=2)
    cfg = FlowConfig(manifold=w.manifold, epsilon=1e-2, grid_n=48, t_max=0.05)
    traj = run_regularized(w, cfg)
    tp, dp = str(tmp_path / "t.csv"), str(tmp_path / "d.csv")
    write_trajectory(tp, dp, traj)
    back = read_trajectory(tp, dp)
    assert back.epsilon == 1e-2
    assert np.array_equal(back.snapshots[-1].values, traj.snapshots[-1].values)


def test_config_round_trip():
    cfg = FlowConfig(manifold=SPH, epsilon=3e-4, grid_n=129, dt=1.25e-4,
                     t_max=0.7, merge_tol=1e-10, snapshot_every=3, seed=11,
                     scheme="explicit", cfl_factor=0.3)
    back = flow_config_from_mapping(parse_config_text(config_to_text(cfg)))
    assert back == cfg
    auto = FlowConfig(manifold=Euclidean(1))
    assert flow_config_from_mapping(parse_config_text(config_to_text(auto))) == auto


def test_parse_config_reports_line_numbers():
    with pytest.raises(Exception, match="line 2"):
        parse_config_text("manifold = sphere:3\nwhat even is this\n")
    with pytest.raises(Exception, match="line 3.*unknown"):
        parse_config_text("manifold = sphere:3\n\nplumage = blue\n")
    with pytest.raises(Exception, match="line 2.*duplicate"):
        parse_config_text("t_max = 1.0\nt_max = 2.0\n")
    with pytest.raises(Exception, match="line 1.*bad value"):
        parse_config_text("grid_n = soon\n")
    # comments and blank lines are invisible
    assert parse_config_text("# hi\n\nt_max = 2.0  # trailing\n") == {"t_max": 2.0}


def test_curve_text_rejects_malformed_input():
    with pytest.raises(Exception, match="metadata"):
        curve_from_text("x,c0\n0.5,1.0\n")
    with pytest.raises(Exception, match="columns"):
        curve_from_text("# curve kind=pc manifold=sphere:3\nx,c0\n0.5,1.0\n")


def test_reports_csv_shape():
    reports = [
        CheckReport("energy", True, 1e-9, 1e-6, (0.5,)),
        CheckReport("monotone", False, 2e-3, 1e-6, (0.25, 0.5)),
    ]
    text = reports_to_csv(reports)
    lines = text.strip().splitlines()
    assert lines[0] == "check,pass,worst,at_t,at_x,tol"
    assert lines[1].startswith("energy,1,")
    assert lines[2].startswith("monotone,0,")


def test_atomic_write_leaves_no_scraps(tmp_path):
    u = scalar_curve([0.5], [0.0, 1.0])
    path = tmp_path / "c.csv"
    write_curve(str(path), u)
    write_curve(str(path), u)  # overwrite via replace
    assert glob.glob(str(tmp_path / ".tmp-*")) == []
    assert read_curve(str(path)).num_jumps == 1


def test_manifest_digests_inputs(tmp_path):
    src = tmp_path / "in.csv"
    write_curve(str(src), scalar_curve([0.5], [0.0, 1.0]))
    out = tmp_path / "out.csv"
    out.write_text("payload\n")
    mpath = tmp_path / "manifest.json"
    write_manifest(str(mpath), "flow", {"solver": "exact"}, [str(src)], [str(out)], seed=7)
    payload = json.loads(mpath.read_text())
    assert payload["tool"] == "mtvf"
    assert payload["command"] == "flow"
    assert payload["seed"] == 7
    assert payload["inputs"]["in.csv"] == sha256_of(str(src))
    assert payload["outputs"] == ["out.csv"]


# ---------------------------------------------------------------------------
# CLI end to end (exit codes are the contract: 0 ok, 2 config, 3 geometry,
# 4 failed verification)
# ---------------------------------------------------------------------------


def _write_config(path, **kv):
    lines = [f"{k} = {v}" for k, v in kv.items()]
    path.write_text("\n".join(lines) + "\n")


def test_cli_generate_flow_verify_pipeline(tmp_path):
    curve_path = tmp_path / "stairs.csv"
    assert main(["generate", "staircase", "--levels", "0,0.8,0.3,1.1",
                 "--out", str(curve_path)]) == 0
    cfg = tmp_path / "run.cfg"
    _write_config(cfg, manifold="euclidean:1", t_max=4.0)
    outdir = tmp_path / "run"
    assert main(["flow", "--config", str(cfg), "--input", str(curve_path),
                 "--out", str(outdir)]) == 0
    assert (outdir / "manifest.json").exists()
    report = tmp_path / "checks.csv"
    assert main(["verify", "--input", str(outdir / "trajectory.csv"),
                 "--checks", "energy,monotone,stopping",
                 "--out", str(report)]) == 0
    assert "stopping,1," in report.read_text()
    manifest = json.loads((outdir / "manifest.json").read_text())
    assert manifest["inputs"]["stairs.csv"] == sha256_of(str(curve_path))


def test_cli_verify_fails_on_corrupted_trajectory(tmp_path):
    u0 = random_rad_curve(SPH, np.random.Generator(np.random.Philox([62, 0])))
    traj = run_exact_pc(u0, t_max=4 * tv_measure(u0).total)
    traj.snapshots[len(traj) // 2] = traj.snapshots[0]  # resurrect old state
    tp, dp = str(tmp_path / "t.csv"), str(tmp_path / "d.csv")
    write_trajectory(tp, dp, traj)
    assert main(["verify", "--input", tp, "--diagnostics", dp,
                 "--checks", "energy"]) == 4


def test_cli_verify_unknown_check_is_config_error(tmp_path):
    u0 = scalar_curve([0.5], [0.0, 1.0])
    traj = run_exact_pc(u0, t_max=1.0)
    tp, dp = str(tmp_path / "t.csv"), str(tmp_path / "d.csv")
    write_trajectory(tp, dp, traj)
    assert main(["verify", "--input", tp, "--checks", "energy,vibes"]) == 2


def test_cli_flow_antipodal_jump_is_geometry_error(tmp_path):
    from mtvf import PiecewiseConstantCurve

    bad = PiecewiseConstantCurve(
        SPH, [0.5], np.array([[1.0, 0, 0], [-1.0, 0, 0]])
    )
    curve_path = tmp_path / "bad.csv"
    write_curve(str(curve_path), bad)
    cfg = tmp_path / "run.cfg"
    _write_config(cfg, manifold="sphere:3", t_max=1.0)
    assert main(["flow", "--config", str(cfg), "--input", str(curve_path),
                 "--out", str(tmp_path / "out")]) == 3


def test_cli_regularized_needs_explicit_epsilon(tmp_path):
    field = noisy_field("sphere:3", grid_n=33, noise=0.05, seed=1)
    curve_path = tmp_path / "field.csv"
    write_curve(str(curve_path), field)
    cfg = tmp_path / "run.cfg"
    _write_config(cfg, manifold="sphere:3", t_max=0.01, grid_n=33)
    args = ["flow", "--config", str(cfg), "--input", str(curve_path),
            "--solver", "regularized", "--out", str(tmp_path / "out")]
    assert main(args) == 2
    assert main(args + ["--eps", "1e-3"]) == 0


def test_cli_flow_rejects_manifold_mismatch(tmp_path):
    curve_path = tmp_path / "stairs.csv"
    write_curve(str(curve_path), scalar_curve([0.5], [0.0, 1.0]))
    cfg = tmp_path / "run.cfg"
    _write_config(cfg, manifold="sphere:3", t_max=1.0)
    assert main(["flow", "--config", str(cfg), "--input", str(curve_path),
                 "--out", str(tmp_path / "out")]) == 2


def test_cli_denoise_reduces_variation(tmp_path):
    field = noisy_field("sphere:3", grid_n=65, noise=0.2, seed=9)
    curve_path = tmp_path / "noisy.csv"
    write_curve(str(curve_path), field)
    outdir = tmp_path / "den"
    assert main(["denoise", "--input", str(curve_path), "--eps", "1e-2",
                 "--tv-fraction", "0.4", "--out", str(outdir)]) == 0
    smoothed = read_curve(str(outdir / "denoised.csv"))
    assert tv_measure(smoothed).total <= 0.5 * tv_measure(field).total
    # refuses piecewise-constant input
    pc_path = tmp_path / "pc.csv"
    write_curve(str(pc_path), scalar_curve([0.5], [0.0, 1.0]))
    assert main(["denoise", "--input", str(pc_path),
                 "--out", str(tmp_path / "den2")]) == 2


def test_cli_generate_two_jump_square_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert main(["generate", "two_jump_square", "--side", "0.6",
                     "--eps", "0.2", "--variant", "midpoint",
                     "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()
    curve = read_curve(str(a))
    assert curve.num_jumps == 3
    ref = two_jump_square(side=0.6, eps=0.2, variant="midpoint")
    assert np.array_equal(curve.values, ref.values)


def test_cli_generate_staircase_needs_levels(tmp_path):
    assert main(["generate", "staircase", "--out", str(tmp_path / "s.csv")]) == 2


def test_cli_lab_semiconvexity_table(tmp_path):
    out = tmp_path / "gap.csv"
    assert main(["lab", "semiconvexity", "--n-max", "25", "--out", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "n,gap,first_positive"
    flagged = [ln for ln in lines[1:] if ln.endswith(",1")]
    assert len(flagged) == 1
    assert flagged[0].startswith("19,")


def test_cli_lab_midpoint_and_stability(tmp_path):
    mid = tmp_path / "mid.csv"
    assert main(["lab", "midpoint", "--side", "0.5", "--out", str(mid)]) == 0
    row = mid.read_text().strip().splitlines()[1].split(",")
    assert float(row[2]) > 0
    stab = tmp_path / "stab.csv"
    assert main(["lab", "stability", "--samples", "50", "--radius", "0.8",
                 "--out", str(stab)]) == 0
    assert stab.read_text().startswith("# max_ratio=")
    assert main(["lab", "hessian", "--dirs", "4", "--r", "0.7",
                 "--out", str(tmp_path / "h.csv")]) == 0
    assert (tmp_path / "h.csv").read_text().strip().endswith(",1")


def test_cli_missing_input_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    _write_config(cfg, manifold="euclidean:1", t_max=1.0)
    assert main(["flow", "--config", str(cfg),
                 "--input", str(tmp_path / "nope.csv"),
                 "--out", str(tmp_path / "out")]) == 2

"""Benchmark harness tests: config parsing, CSV layouts, run determinism,
divergence containment, and the command-line entry points."""

import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from ocpls.bench import (
    CURVE_HEADER,
    RECORD_HEADER,
    SUMMARY_HEADER,
    ArmSpec,
    ConfigError,
    RunRecord,
    SummaryRow,
    build_problem,
    default_arms,
    emit_curves,
    load_config,
    read_records,
    read_summary,
    run_experiment,
    save_config,
    write_records,
    write_summary,
)

QUAD_INI = """\
[problem]
kind = quadratic
seed = 0
dim = 4
lambda_min = 1.0
lambda_max = 4.0
rotate = true

[run]
max_iterations = 120
validation_interval = 20

[arm:ocp-ls]
optimizer = ocp-ls
alpha = 2.5
beta1 = 0.5
beta2 = 0.9
clamp_floor = 40.0
inner_cap = 10
"""

POSE_INI = """\
[problem]
kind = pose
name = mini
seed = 0
n_train = 24
n_val = 8
feature_dim = 6
hidden = 8

[run]
max_iterations = 30
batch_size = 8
validation_interval = 10
eval_checkpoints = 10, 20

[robustness]
noise_levels = 0.0, 0.1

[arm:ocp-ls]
optimizer = ocp-ls
alpha = 0.0005
clamp_floor = 0.01

[arm:adamw]
optimizer = adamw
alpha = 0.001
"""

# alpha * clamped curvature >= 100 puts the series recursion far outside its
# convergence region, so this arm blows up within a few iterations.
DIVERGING_ARM = """\
[arm:unstable]
optimizer = ocp-ls
alpha = 2.5
clamp_floor = 40.0
inner_mode = recursion
inner_cap = 10
"""


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


def _cli(*args, env_extra=None):
    env = dict(os.environ)
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        [sys.executable, "-m", "ocpls.cli", *map(str, args)],
        capture_output=True,
        text=True,
        env=env,
    )


# ------------------------------------------------------------------ config


def test_minimal_config_fills_defaults(tmp_path):
    cfg = load_config(_write(tmp_path, "m.ini", "[problem]\nkind = quadratic\n"))
    assert cfg.problem.kind == "quadratic"
    assert cfg.problem.dim == 8
    assert cfg.run.max_iterations == 500
    assert cfg.run.batch_size == 32
    assert cfg.arms == default_arms()
    assert cfg.robustness == ()


def test_config_round_trip(tmp_path):
    cfg = load_config(_write(tmp_path, "a.ini", POSE_INI))
    out = tmp_path / "b.ini"
    save_config(cfg, out)
    assert load_config(out) == cfg


def test_config_rejects_unknown_section(tmp_path):
    path = _write(tmp_path, "bad.ini", "[problem]\nkind = pose\n\n[extras]\nx = 1\n")
    with pytest.raises(ConfigError, match=r"unknown section \[extras\]"):
        load_config(path)


def test_config_rejects_unknown_keys(tmp_path):
    path = _write(tmp_path, "bad.ini", "[problem]\nkind = pose\nlearning_rate = 1\n")
    with pytest.raises(ConfigError, match="unknown key 'learning_rate'"):
        load_config(path)
    path = _write(tmp_path, "bad2.ini", "[problem]\nkind = pose\n\n[robustness]\nlevels = 1\n")
    with pytest.raises(ConfigError, match="unknown key 'levels'"):
        load_config(path)


def test_config_rejects_arm_keys_foreign_to_the_optimizer(tmp_path):
    # rho_clip belongs to sophia; an ocp-ls arm may not set it.
    path = _write(
        tmp_path, "bad.ini", "[problem]\nkind = pose\n\n[arm:a]\noptimizer = ocp-ls\nrho_clip = 0.1\n"
    )
    with pytest.raises(ConfigError, match="unknown key 'rho_clip'"):
        load_config(path)


def test_config_rejects_unknown_optimizer(tmp_path):
    path = _write(tmp_path, "bad.ini", "[problem]\nkind = pose\n\n[arm:a]\noptimizer = sgd\n")
    with pytest.raises(ConfigError, match="unknown optimizer"):
        load_config(path)


def test_config_rejects_duplicate_arms(tmp_path):
    text = "[problem]\nkind = pose\n\n[arm:a]\noptimizer = adamw\n\n[arm:a ]\noptimizer = sophia\n"
    with pytest.raises(ConfigError, match="unique|duplicate"):
        load_config(_write(tmp_path, "dup.ini", text))


def test_config_rejects_bad_values(tmp_path):
    path = _write(tmp_path, "bad.ini", "[problem]\nkind = pose\nseed = soon\n")
    with pytest.raises(ConfigError, match="cannot parse 'soon'"):
        load_config(path)
    path = _write(tmp_path, "bad2.ini", "[problem]\nkind = maze\n")
    with pytest.raises(ConfigError, match="kind must be one of"):
        load_config(path)
    path = _write(tmp_path, "bad3.ini", "[problem]\nkind = pose\n\n[run]\nmax_iterations = 0\n")
    with pytest.raises(ConfigError, match="max_iterations"):
        load_config(path)


def test_config_inner_cap_accepts_none(tmp_path):
    text = "[problem]\nkind = pose\n\n[arm:a]\noptimizer = ocp-ls\ninner_cap = none\n"
    cfg = load_config(_write(tmp_path, "cap.ini", text))
    assert cfg.arms[0].param_dict() == {"inner_cap": None}


def test_missing_config_file_raises_config_error(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.ini")


# ----------------------------------------------------------------- writers


def test_records_round_trip(tmp_path):
    records = [
        RunRecord(1, 1.0 / 3.0, float("nan"), 0.25, 2, 0.0),
        RunRecord(2, 0.125, 0.5, 0.1, 0, 0.0),
    ]
    path = tmp_path / "records.csv"
    write_records(records, path)
    text = path.read_text()
    assert text.splitlines()[0] == RECORD_HEADER
    assert text.endswith("\n")
    assert "nan" in text.splitlines()[1]
    back = read_records(path)
    assert [r.k for r in back] == [1, 2]
    assert back[0].train_loss == float(f"{1.0 / 3.0:.6g}")
    assert math.isnan(back[0].val_loss)
    assert back[0].clamp_hits == 2


def test_records_empty_list_writes_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    write_records([], path)
    assert path.read_text() == RECORD_HEADER + "\n"
    assert read_records(path) == []


def test_records_reject_foreign_header(tmp_path):
    path = tmp_path / "other.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="unexpected record header"):
        read_records(path)


def test_summary_round_trip(tmp_path):
    rows = [SummaryRow("desk", "ocp-ls", 0.0307, 0.0308, 1.85, 2.31, -2.02, -4.27)]
    path = tmp_path / "summary.csv"
    write_summary(rows, path)
    assert path.read_text().splitlines()[0] == SUMMARY_HEADER
    back = read_summary(path)
    assert back[0].dataset == "desk"
    assert back[0].algorithm == "ocp-ls"
    assert back[0].median_pos_m == 0.0307


def test_emit_curves_layout_and_stability(tmp_path):
    records = {
        "a": [RunRecord(1, 0.5, float("nan"), 0.1, 0, 0.0)],
        "b": [RunRecord(1, 0.25, 1.0, 0.1, 0, 0.0)],
    }
    p1, p2 = tmp_path / "c1.csv", tmp_path / "c2.csv"
    emit_curves(records, p1)
    emit_curves(records, p2)
    assert p1.read_bytes() == p2.read_bytes()
    lines = p1.read_text().splitlines()
    assert lines[0] == CURVE_HEADER
    assert lines[1] == "a,1,0.5,nan"
    assert lines[2] == "b,1,0.25,1"


# ------------------------------------------------------------- experiments


def test_quadratic_experiment_reaches_the_optimum(tmp_path):
    cfg = load_config(_write(tmp_path, "q.ini", QUAD_INI))
    results = run_experiment(cfg)
    result = results["ocp-ls"]
    assert not result.diverged
    assert len(result.records) == 120
    problem = build_problem(cfg.problem)
    x0 = problem.init_x(np.random.default_rng(cfg.problem.seed + 1))
    assert problem.gap(result.x_final) <= 1e-6 * problem.gap(x0)
    rate = result.report["rate"]
    assert rate["fit_r2"] >= 0.99
    assert rate["monotone_violations"] == 0


def test_experiment_outputs_are_byte_identical_across_reruns(tmp_path):
    cfg = load_config(_write(tmp_path, "q.ini", QUAD_INI))
    dirs = [tmp_path / "r1", tmp_path / "r2"]
    for d in dirs:
        run_experiment(cfg, out_dir=d)
    for name in ("records_ocp-ls.csv", "curves.csv", "summary.csv"):
        a = (dirs[0] / name).read_bytes()
        b = (dirs[1] / name).read_bytes()
        assert a == b, name


def test_arms_with_identical_settings_produce_identical_records(tmp_path):
    # The shared start point and batch schedule make optimizer settings the
    # only degree of freedom between arms.
    text = POSE_INI.replace("[arm:adamw]\noptimizer = adamw\nalpha = 0.001\n", "")
    text += "\n[arm:twin]\noptimizer = ocp-ls\nalpha = 0.0005\nclamp_floor = 0.01\n"
    cfg = load_config(_write(tmp_path, "twin.ini", text))
    results = run_experiment(cfg)
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    write_records(results["ocp-ls"].records, pa)
    write_records(results["twin"].records, pb)
    assert pa.read_bytes() == pb.read_bytes()


def test_arm_subset_selection(tmp_path):
    cfg = load_config(_write(tmp_path, "p.ini", POSE_INI))
    out = tmp_path / "out"
    results = run_experiment(cfg, out_dir=out, arm_names=["adamw"])
    assert list(results) == ["adamw"]
    assert (out / "records_adamw.csv").exists()
    assert not (out / "records_ocp-ls.csv").exists()
    with pytest.raises(ConfigError, match="unknown arm"):
        run_experiment(cfg, arm_names=["resnet"])


def test_pose_experiment_reports(tmp_path):
    cfg = load_config(_write(tmp_path, "p.ini", POSE_INI))
    out = tmp_path / "out"
    results = run_experiment(cfg, out_dir=out)
    for result in results.values():
        assert not result.diverged
        report = result.report
        assert set(report["checkpoints"]) == {"10", "20", "30"}
        levels = [b["noise_level"] for b in report["robustness"]]
        assert levels == [0.0, 0.1]
        # validation loss is sampled on the interval, nan elsewhere
        assert math.isnan(result.records[0].val_loss)
        assert not math.isnan(result.records[9].val_loss)
        assert result.summary.dataset == "mini"

    rows = read_summary(out / "summary.csv")
    assert [r.algorithm for r in rows] == ["ocp-ls", "adamw"]
    report = json.loads((out / "report.json").read_text())
    assert report["dataset"] == "mini"
    assert set(report["arms"]) == {"ocp-ls", "adamw"}


def test_pose_robustness_errors_grow_with_noise(tmp_path):
    # More feature noise at evaluation time cannot help a fixed model; with
    # one shared noise realisation the degradation is monotone in practice.
    cfg = load_config(_write(tmp_path, "p.ini", POSE_INI))
    result = run_experiment(cfg)["ocp-ls"]
    blocks = result.report["robustness"]
    assert blocks[0]["median_pos_m"] <= blocks[1]["median_pos_m"] * (1 + 1e-9)


def test_diverged_arm_is_contained(tmp_path):
    cfg = load_config(_write(tmp_path, "q.ini", QUAD_INI + "\n" + DIVERGING_ARM))
    out = tmp_path / "both"
    results = run_experiment(cfg, out_dir=out)
    assert results["unstable"].diverged
    assert results["unstable"].report["diverged_at"] is not None
    assert len(results["unstable"].records) < 120
    assert not results["ocp-ls"].diverged

    solo = tmp_path / "solo"
    run_experiment(cfg, out_dir=solo, arm_names=["ocp-ls"])
    assert (out / "records_ocp-ls.csv").read_bytes() == (solo / "records_ocp-ls.csv").read_bytes()


def test_diverged_pose_arm_gets_a_nan_summary_row(tmp_path):
    text = POSE_INI + "\n" + DIVERGING_ARM
    cfg = load_config(_write(tmp_path, "p.ini", text))
    results = run_experiment(cfg, arm_names=["unstable"])
    row = results["unstable"].summary
    assert results["unstable"].diverged
    assert math.isnan(row.median_pos_m) and math.isnan(row.mean_rot_deg)
    assert row.algorithm == "unstable"


# --------------------------------------------------------------------- CLI


def test_cli_run_writes_outputs(tmp_path):
    cfg_path = _write(tmp_path, "quad.ini", QUAD_INI)
    out = tmp_path / "out"
    proc = _cli("run", cfg_path, "--out-dir", out)
    assert proc.returncode == 0, proc.stderr
    for name in ("records_ocp-ls.csv", "summary.csv", "curves.csv", "report.json"):
        assert (out / name).exists(), name


def test_cli_run_honours_overrides(tmp_path):
    cfg_path = _write(tmp_path, "quad.ini", QUAD_INI)
    out = tmp_path / "out"
    proc = _cli("run", cfg_path, "--out-dir", out, "--max-iterations", 15)
    assert proc.returncode == 0, proc.stderr
    assert len(read_records(out / "records_ocp-ls.csv")) == 15


def test_cli_run_env_out_dir(tmp_path):
    cfg_path = _write(tmp_path, "quad.ini", QUAD_INI)
    proc = _cli("run", cfg_path, env_extra={"OCPLS_OUT_DIR": str(tmp_path / "envout")})
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "envout" / "quad" / "summary.csv").exists()


def test_cli_run_rejects_bad_config(tmp_path):
    cfg_path = _write(tmp_path, "bad.ini", "[problem]\nkind = pose\nbogus = 1\n")
    proc = _cli("run", cfg_path, "--out-dir", tmp_path / "x")
    assert proc.returncode == 1
    assert "config error" in proc.stderr


def test_cli_run_missing_config_exits_one(tmp_path):
    proc = _cli("run", tmp_path / "absent.ini")
    assert proc.returncode == 1


def test_cli_usage_error_exits_one():
    proc = _cli("run")
    assert proc.returncode == 1


def test_cli_run_exits_two_when_every_arm_diverges(tmp_path):
    text = QUAD_INI.split("[arm:")[0] + DIVERGING_ARM
    cfg_path = _write(tmp_path, "div.ini", text)
    proc = _cli("run", cfg_path, "--out-dir", tmp_path / "out")
    assert proc.returncode == 2
    assert "divergence detected" in proc.stderr


def test_cli_partial_divergence_still_succeeds(tmp_path):
    cfg_path = _write(tmp_path, "mix.ini", QUAD_INI + "\n" + DIVERGING_ARM)
    proc = _cli("run", cfg_path, "--out-dir", tmp_path / "out")
    assert proc.returncode == 0
    assert "divergence detected" in proc.stderr


def test_cli_check_theory_passes_on_a_stable_run(tmp_path):
    cfg_path = _write(tmp_path, "quad.ini", QUAD_INI)
    out = tmp_path / "out"
    assert _cli("run", cfg_path, "--out-dir", out).returncode == 0
    proc = _cli("check-theory", out / "records_ocp-ls.csv", cfg_path, "--out-dir", tmp_path / "t")
    assert proc.returncode == 0, proc.stderr + proc.stdout
    assert "all theory checks passed" in proc.stdout
    assert "monotonic" in proc.stdout


def test_cli_check_theory_detects_tampered_records(tmp_path):
    cfg_path = _write(tmp_path, "quad.ini", QUAD_INI)
    out = tmp_path / "out"
    assert _cli("run", cfg_path, "--out-dir", out).returncode == 0
    records_path = out / "records_ocp-ls.csv"
    lines = records_path.read_text().splitlines()
    parts = lines[3].split(",")
    parts[1] = "123.456"
    lines[3] = ",".join(parts)
    records_path.write_text("\n".join(lines) + "\n")
    proc = _cli("check-theory", records_path, cfg_path)
    assert proc.returncode == 2
    assert "CHECK FAILED" in proc.stderr


def test_cli_check_theory_rejects_pose_configs(tmp_path):
    cfg_path = _write(tmp_path, "pose.ini", POSE_INI)
    records = _write(tmp_path, "records_ocp-ls.csv", RECORD_HEADER + "\n")
    proc = _cli("check-theory", records, cfg_path)
    assert proc.returncode == 1
    assert "config error" in proc.stderr


def test_cli_gen_data_writes_both_splits(tmp_path):
    from ocpls.pose import load_scene_csv

    cfg_path = _write(tmp_path, "pose.ini", POSE_INI)
    out_csv = tmp_path / "scene.csv"
    proc = _cli("gen-data", cfg_path, out_csv, "--split", "both")
    assert proc.returncode == 0, proc.stderr
    train = load_scene_csv(out_csv)
    val = load_scene_csv(tmp_path / "scene_val.csv")
    assert len(train) == 24 and len(val) == 8
    assert train.n_features == 6


def test_cli_gen_data_rejects_non_pose_specs(tmp_path):
    cfg_path = _write(tmp_path, "quad.ini", QUAD_INI)
    proc = _cli("gen-data", cfg_path, tmp_path / "scene.csv")
    assert proc.returncode == 1
    assert "config error" in proc.stderr

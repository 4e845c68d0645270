"""Config-driven benchmark harness comparing optimizers on shared problems.

An experiment is described by a flat INI-style config: one ``[problem]``
section, optional ``[run]`` and ``[robustness]`` sections, and one
``[arm:<name>]`` section per optimizer arm (three default arms are supplied
when none are listed). Every arm starts from the same initial parameter
vector and consumes the identical mini-batch index sequence, so loss curves
are directly comparable, and a diverging arm never perturbs its siblings.

Outputs per run: a per-arm iteration record CSV, a dataset/algorithm summary
CSV shaped like a results table, a merged loss-curve CSV, and a JSON report
holding rate diagnostics, checkpoint and robustness evaluations, and wall
times. The CSVs are byte-deterministic for a given config; wall-clock timing
therefore lives only in the JSON report, and the records' ``elapsed_s``
column is written as zero.
"""

from __future__ import annotations

import configparser
import json
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import metrics
from .optimizers import OcpLs, make_optimizer
from .pose import PoseTask, Scene, TinyRegressor, make_synthetic_scene
from .problems import QuadraticProblem, RosenbrockProblem
from .theory import estimate_beta, estimate_mu_pl, fit_empirical_rate, rho_infinity

__all__ = [
    "ConfigError",
    "ProblemSpec",
    "RunSpec",
    "ArmSpec",
    "ExperimentConfig",
    "RunRecord",
    "SummaryRow",
    "load_config",
    "save_config",
    "build_problem",
    "run_experiment",
    "write_records",
    "read_records",
    "write_summary",
    "read_summary",
    "emit_curves",
]

RECORD_HEADER = "k,train_loss,val_loss,step_norm,clamp_hits,elapsed_s"
SUMMARY_HEADER = "dataset,algorithm,median_pos_m,mean_pos_m,median_rot_deg,mean_rot_deg,s_p,s_q"
CURVE_HEADER = "arm,k,train_loss,val_loss"

PROBLEM_KINDS = ("pose", "quadratic", "rosenbrock")

DEFAULT_ARM_NAMES = ("ocp-ls", "adamw", "sophia")


class ConfigError(ValueError):
    """Invalid experiment configuration (bad file, unknown key, bad value)."""


@dataclass(frozen=True)
class ProblemSpec:
    kind: str = "pose"
    name: str = ""
    seed: int = 0
    # pose settings
    n_train: int = 256
    n_val: int = 64
    noise_sigma: float = 0.0
    feature_dim: int = 16
    hidden: tuple = (64, 64)
    # quadratic / rosenbrock settings
    dim: int = 8
    lambda_min: float = 1.0
    lambda_max: float = 4.0
    reg: float = 0.0
    rotate: bool = True

    @property
    def dataset(self) -> str:
        return self.name or self.kind


@dataclass(frozen=True)
class RunSpec:
    max_iterations: int = 500
    batch_size: int = 32
    validation_interval: int = 25
    eval_checkpoints: tuple = (50, 150)
    out_dir: str = ""


@dataclass(frozen=True)
class ArmSpec:
    name: str
    optimizer: str = "ocp-ls"
    params: tuple = ()  # sorted (key, value) pairs, hashable and order-stable

    def param_dict(self) -> dict:
        return dict(self.params)


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    run: RunSpec = field(default_factory=RunSpec)
    arms: tuple = ()
    robustness: tuple = ()

    def arm_named(self, name: str) -> ArmSpec:
        for arm in self.arms:
            if arm.name == name:
                return arm
        raise ConfigError(f"no arm named {name!r} in this config")


@dataclass(frozen=True)
class RunRecord:
    k: int
    train_loss: float
    val_loss: float  # nan on iterations without a validation pass
    step_norm: float
    clamp_hits: int
    elapsed_s: float


@dataclass(frozen=True)
class SummaryRow:
    dataset: str
    algorithm: str
    median_pos_m: float
    mean_pos_m: float
    median_rot_deg: float
    mean_rot_deg: float
    s_p: float
    s_q: float


# --------------------------------------------------------------------------
# config parsing


def _parse_bool(raw: str, key: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"key {key!r}: expected a boolean, got {raw!r}")


def _parse_int_tuple(raw: str, key: str) -> tuple:
    raw = raw.strip()
    if not raw:
        return ()
    try:
        return tuple(int(part) for part in raw.split(","))
    except ValueError:
        raise ConfigError(f"key {key!r}: expected comma-separated integers, got {raw!r}") from None


def _parse_float_tuple(raw: str, key: str) -> tuple:
    raw = raw.strip()
    if not raw:
        return ()
    try:
        return tuple(float(part) for part in raw.split(","))
    except ValueError:
        raise ConfigError(f"key {key!r}: expected comma-separated numbers, got {raw!r}") from None


def _convert(raw: str, kind, key: str):
    if kind is bool:
        return _parse_bool(raw, key)
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"key {key!r}: cannot parse {raw!r} as {kind.__name__}") from None


_PROBLEM_TYPES = {
    "kind": str,
    "name": str,
    "seed": int,
    "n_train": int,
    "n_val": int,
    "noise_sigma": float,
    "feature_dim": int,
    "hidden": "int_tuple",
    "dim": int,
    "lambda_min": float,
    "lambda_max": float,
    "reg": float,
    "rotate": bool,
}

_RUN_TYPES = {
    "max_iterations": int,
    "batch_size": int,
    "validation_interval": int,
    "eval_checkpoints": "int_tuple",
    "out_dir": str,
}

# Optimizer hyperparameters reachable from a config file, with their types.
_ARM_VALUE_TYPES = {
    "alpha": float,
    "beta1": float,
    "beta2": float,
    "weight_decay": float,
    "clamp_floor": float,
    "inner_mode": str,
    "inner_cap": "int_or_none",
    "eps": float,
    "rho_clip": float,
}


def _parse_section(section, types: dict, key_prefix: str) -> dict:
    values = {}
    for key, raw in section.items():
        if key not in types:
            raise ConfigError(f"unknown key {key!r} in section [{key_prefix}]")
        kind = types[key]
        if kind == "int_tuple":
            values[key] = _parse_int_tuple(raw, key)
        elif kind == "int_or_none":
            values[key] = None if raw.strip().lower() in ("none", "unlimited") else _convert(raw, int, key)
        else:
            values[key] = _convert(raw, kind, key)
    return values


def _parse_arm(name: str, section) -> ArmSpec:
    if not name:
        raise ConfigError("arm sections need a name: use [arm:<name>]")
    optimizer = section.get("optimizer", "ocp-ls").strip()
    try:
        valid_keys = set(make_optimizer(optimizer).get_params())
    except ValueError as exc:
        raise ConfigError(f"arm {name!r}: {exc}") from None
    params = {}
    for key, raw in section.items():
        if key == "optimizer":
            continue
        if key not in _ARM_VALUE_TYPES or key not in valid_keys:
            raise ConfigError(f"unknown key {key!r} in section [arm:{name}]")
        kind = _ARM_VALUE_TYPES[key]
        if kind == "int_or_none":
            params[key] = None if raw.strip().lower() in ("none", "unlimited") else _convert(raw, int, key)
        else:
            params[key] = _convert(raw, kind, key)
    return ArmSpec(name=name, optimizer=optimizer, params=tuple(sorted(params.items())))


def default_arms() -> tuple:
    """The three standard arms used when a config lists none."""
    return tuple(ArmSpec(name=n, optimizer=n) for n in DEFAULT_ARM_NAMES)


def load_config(path) -> ExperimentConfig:
    """Parse and validate an experiment config file.

    All keys are optional except that arm names must be unique and keys must
    be known; defaults fill in everything else, including the standard
    three-arm lineup when no arm sections are present.
    """
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section in {path}: {exc}") from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key in {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None

    problem_kwargs = {}
    run_kwargs = {}
    robustness: tuple = ()
    arms: list[ArmSpec] = []
    for section_name in parser.sections():
        section = parser[section_name]
        if section_name == "problem":
            problem_kwargs = _parse_section(section, _PROBLEM_TYPES, "problem")
        elif section_name == "run":
            run_kwargs = _parse_section(section, _RUN_TYPES, "run")
        elif section_name == "robustness":
            for key, raw in section.items():
                if key != "noise_levels":
                    raise ConfigError(f"unknown key {key!r} in section [robustness]")
                robustness = _parse_float_tuple(raw, key)
        elif section_name.startswith("arm:"):
            arms.append(_parse_arm(section_name[4:].strip(), section))
        else:
            raise ConfigError(f"unknown section [{section_name}] in {path}")

    problem = ProblemSpec(**problem_kwargs)
    if problem.kind not in PROBLEM_KINDS:
        raise ConfigError(f"problem kind must be one of {PROBLEM_KINDS}, got {problem.kind!r}")
    run = RunSpec(**run_kwargs)
    if run.max_iterations < 1:
        raise ConfigError(f"max_iterations must be positive, got {run.max_iterations}")
    if run.batch_size < 1:
        raise ConfigError(f"batch_size must be positive, got {run.batch_size}")
    if run.validation_interval < 1:
        raise ConfigError(f"validation_interval must be positive, got {run.validation_interval}")
    if not arms:
        arms = list(default_arms())
    names = [arm.name for arm in arms]
    if len(set(names)) != len(names):
        raise ConfigError(f"arm names must be unique, got {names}")
    return ExperimentConfig(problem=problem, run=run, arms=tuple(arms), robustness=robustness)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    if value is None:
        return "none"
    return str(value)


def save_config(cfg: ExperimentConfig, path) -> None:
    """Write a config that :func:`load_config` parses back to an equal object."""
    lines = ["[problem]"]
    for key, value in asdict(cfg.problem).items():
        lines.append(f"{key} = {_format_value(value)}")
    lines.append("")
    lines.append("[run]")
    for key, value in asdict(cfg.run).items():
        lines.append(f"{key} = {_format_value(value)}")
    lines.append("")
    if cfg.robustness:
        lines.append("[robustness]")
        lines.append(f"noise_levels = {_format_value(cfg.robustness)}")
        lines.append("")
    for arm in cfg.arms:
        lines.append(f"[arm:{arm.name}]")
        lines.append(f"optimizer = {arm.optimizer}")
        for key, value in arm.params:
            lines.append(f"{key} = {_format_value(value)}")
        lines.append("")
    with open(path, "w") as fh:
        fh.write("\n".join(lines))


# --------------------------------------------------------------------------
# problems behind a uniform training interface


class _AnalyticProblem:
    """Full-batch wrapper for quadratic / Rosenbrock objectives."""

    is_pose = False

    def __init__(self, inner):
        self.inner = inner
        self.n_params = inner.dim
        self.n_train = 1

    def init_x(self, rng: np.random.Generator) -> np.ndarray:
        if isinstance(self.inner, QuadraticProblem):
            return self.inner.x_star + rng.standard_normal(self.inner.dim)
        return rng.uniform(-1.0, 1.0, size=self.inner.dim)

    def batch_loss_grad(self, x, idx=None):
        return self.inner.eval(x)

    def val_loss(self, x) -> float:
        return self.inner.eval(x)[0]

    def gap(self, x) -> float:
        return self.inner.gap(x)


class _PoseProblem:
    """Mini-batch wrapper around :class:`PoseTask`."""

    is_pose = True

    def __init__(self, task: PoseTask):
        self.task = task
        self.n_params = task.n_params
        self.n_train = task.n_train

    def init_x(self, rng: np.random.Generator) -> np.ndarray:
        return self.task.init_x(rng)

    def batch_loss_grad(self, x, idx=None):
        return self.task.loss_and_grad(x, idx)

    def val_loss(self, x) -> float:
        return self.task.loss(x, "val")


def build_problem(spec: ProblemSpec):
    """Instantiate the training problem described by a problem spec."""
    if spec.kind == "pose":
        train, val = make_synthetic_scene(
            spec.n_train, spec.n_val, spec.noise_sigma, spec.seed, spec.feature_dim
        )
        model = TinyRegressor(n_features=spec.feature_dim, hidden=spec.hidden)
        return _PoseProblem(PoseTask(train, val, model))
    if spec.kind == "quadratic":
        quad = QuadraticProblem.random(
            spec.dim,
            spec.lambda_min,
            spec.lambda_max,
            seed=spec.seed,
            reg=spec.reg,
            rotate=spec.rotate,
        )
        return _AnalyticProblem(quad)
    if spec.kind == "rosenbrock":
        return _AnalyticProblem(RosenbrockProblem(spec.dim))
    raise ConfigError(f"problem kind must be one of {PROBLEM_KINDS}, got {spec.kind!r}")


# --------------------------------------------------------------------------
# experiment runner


@dataclass
class ArmResult:
    name: str
    records: list
    summary: "SummaryRow | None"
    report: dict
    diverged: bool
    x_final: np.ndarray


def _error_block(problem, x, features=None) -> dict:
    pos, rot = problem.task.errors(x, "val", features)
    summary = metrics.summarize(pos, rot)
    return {
        "median_pos_m": summary.median_position,
        "mean_pos_m": summary.mean_position,
        "median_rot_deg": summary.median_rotation,
        "mean_rot_deg": summary.mean_rotation,
    }


def _rate_block(arm: ArmSpec, gaps, trajectory, problem) -> dict:
    inner = problem.inner
    block: dict = {}
    beta_exact = getattr(inner, "smoothness", None)
    block["beta_est"] = float(beta_exact) if beta_exact is not None else estimate_beta(inner)
    mu_exact = getattr(inner, "pl_constant", None)
    block["mu_exact"] = float(mu_exact) if mu_exact is not None else None
    try:
        block["mu_pl_est"] = estimate_mu_pl(inner, trajectory)
    except ValueError:
        block["mu_pl_est"] = None
    alpha = arm.param_dict().get("alpha", make_optimizer(arm.optimizer).alpha)
    try:
        beta = block["beta_est"]
        # prefer the exact gradient-dominance constant; the trajectory
        # estimate only lower-bounds the slowest mode along one path
        mu = block["mu_exact"] if block["mu_exact"] is not None else block["mu_pl_est"]
        if beta is None or mu is None or not np.isfinite(beta):
            raise ValueError("constants unavailable")
        block["rho_pred"] = rho_infinity(alpha, beta, mu)
        block["rho_pred_note"] = ""
    except ValueError as exc:
        block["rho_pred"] = None
        block["rho_pred_note"] = str(exc)
    try:
        rho_fit, r2 = fit_empirical_rate(np.asarray(gaps))
        block["rho_fit"] = rho_fit
        block["fit_r2"] = r2
    except ValueError as exc:
        block["rho_fit"] = None
        block["fit_r2"] = None
        block["rho_fit_note"] = str(exc)
    g = np.asarray(gaps)
    # tiny relative slack so float noise at the convergence plateau does not
    # count as a decay violation
    block["monotone_violations"] = int(np.count_nonzero(g[1:] > g[:-1] * (1.0 + 1e-9) + 1e-300))
    return block


def _run_single_arm(arm: ArmSpec, problem, x0, schedule, run: RunSpec, robustness_noise):
    """Train one arm; never raises on divergence, marks it in the result."""
    optimizer = make_optimizer(arm.optimizer, **arm.param_dict())
    t_start = time.perf_counter()
    x = x0.copy()
    state = optimizer.init_state(x.shape[0])
    records: list[RunRecord] = []
    checkpoints: dict = {}
    gaps: list[float] = []
    trajectory: list[np.ndarray] = []
    a3_violations = 0
    diverged = False
    diverged_at = None
    audit_a3 = isinstance(optimizer, OcpLs)
    total = run.max_iterations
    checkpoint_set = {c for c in run.eval_checkpoints if 1 <= c <= total} | {total}

    for it in range(1, total + 1):
        idx = schedule[it - 1] if schedule is not None else None
        with np.errstate(over="ignore", invalid="ignore"):
            loss, grad = problem.batch_loss_grad(x, idx)
        if not (np.isfinite(loss) and np.all(np.isfinite(grad))):
            records.append(RunRecord(it, float(loss), float("nan"), float("nan"), 0, 0.0))
            diverged, diverged_at = True, it
            break
        if not problem.is_pose:
            gaps.append(problem.gap(x))
            trajectory.append(x.copy())
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                x_new, state_new = optimizer.step(state, x, grad)
        except (FloatingPointError, ValueError):
            records.append(RunRecord(it, float(loss), float("nan"), float("nan"), 0, 0.0))
            diverged, diverged_at = True, it
            break
        if not np.all(np.isfinite(x_new)):
            records.append(RunRecord(it, float(loss), float("nan"), float("nan"), 0, 0.0))
            diverged, diverged_at = True, it
            break
        if audit_a3:
            a3_violations += int(
                np.count_nonzero(np.abs(1.0 - optimizer.alpha * state_new.h_avg) >= 1.0)
            )
        need_val = it % run.validation_interval == 0 or it == total
        val_loss = problem.val_loss(x_new) if need_val else float("nan")
        records.append(
            RunRecord(
                k=it,
                train_loss=float(loss),
                val_loss=float(val_loss),
                step_norm=float(np.linalg.norm(x_new - x)),
                clamp_hits=int(state_new.clamp_hits - state.clamp_hits),
                elapsed_s=0.0,
            )
        )
        x, state = x_new, state_new
        if problem.is_pose and it in checkpoint_set:
            checkpoints[str(it)] = _error_block(problem, x)

    report: dict = {
        "optimizer": arm.optimizer,
        "diverged": diverged,
        "diverged_at": diverged_at,
        "clamp_hits_total": int(state.clamp_hits),
        "a3_violation_count": a3_violations if audit_a3 else None,
        "final_train_loss": records[-1].train_loss if records else None,
    }
    summary = None
    if problem.is_pose:
        if diverged:
            # x is the last finite iterate; metrics are meaningless, so the
            # row carries nan but still marks the arm in the summary table
            nan = float("nan")
            summary = SummaryRow("", arm.name, nan, nan, nan, nan, float(x[-2]), float(x[-1]))
        else:
            block = _error_block(problem, x)
            summary = SummaryRow(
                dataset="",
                algorithm=arm.name,
                median_pos_m=block["median_pos_m"],
                mean_pos_m=block["mean_pos_m"],
                median_rot_deg=block["median_rot_deg"],
                mean_rot_deg=block["mean_rot_deg"],
                s_p=float(x[-2]),
                s_q=float(x[-1]),
            )
            report["checkpoints"] = checkpoints
            if robustness_noise is not None:
                blocks = []
                for level, eps in robustness_noise:
                    noisy = problem.task.val.features + level * eps
                    block = _error_block(problem, x, features=noisy)
                    block["noise_level"] = level
                    blocks.append(block)
                report["robustness"] = blocks
    if not problem.is_pose and not diverged and len(gaps) >= 10:
        report["rate"] = _rate_block(arm, gaps, trajectory[:: max(1, len(trajectory) // 64)], problem)
    report["wall_time_s"] = time.perf_counter() - t_start
    return ArmResult(
        name=arm.name,
        records=records,
        summary=summary,
        report=report,
        diverged=diverged,
        x_final=x,
    )


def run_experiment(cfg: ExperimentConfig, out_dir=None, arm_names=None) -> dict:
    """Run every arm of an experiment; optionally restrict to ``arm_names``.

    Returns {arm name: ArmResult}. When ``out_dir`` is given, writes per-arm
    record CSVs, the summary CSV, the merged loss-curve CSV and report.json
    into it. Arms share the initial point and the batch schedule; a diverged
    arm is contained and marked, leaving its siblings untouched.
    """
    import os

    if arm_names:
        missing = [n for n in arm_names if all(a.name != n for a in cfg.arms)]
        if missing:
            raise ConfigError(f"unknown arm(s) requested: {missing}")
        arms = tuple(a for a in cfg.arms if a.name in set(arm_names))
    else:
        arms = cfg.arms

    problem = build_problem(cfg.problem)
    x0 = problem.init_x(np.random.default_rng(cfg.problem.seed + 1))
    if problem.is_pose:
        rng_batches = np.random.default_rng(cfg.problem.seed + 2)
        batch = min(cfg.run.batch_size, problem.n_train)
        schedule = [
            rng_batches.integers(0, problem.n_train, size=batch)
            for _ in range(cfg.run.max_iterations)
        ]
    else:
        schedule = None
    robustness_noise = None
    if problem.is_pose and cfg.robustness:
        eps = np.random.default_rng(cfg.problem.seed + 3).standard_normal(
            problem.task.val.features.shape
        )
        robustness_noise = [(level, eps) for level in cfg.robustness]

    results: dict[str, ArmResult] = {}
    for arm in arms:
        result = _run_single_arm(arm, problem, x0, schedule, cfg.run, robustness_noise)
        if result.summary is not None:
            result.summary = replace(result.summary, dataset=cfg.problem.dataset)
        results[arm.name] = result

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        for name, result in results.items():
            write_records(result.records, os.path.join(out_dir, f"records_{_safe_name(name)}.csv"))
        write_summary(
            [r.summary for r in results.values() if r.summary is not None],
            os.path.join(out_dir, "summary.csv"),
        )
        emit_curves(
            {name: r.records for name, r in results.items()},
            os.path.join(out_dir, "curves.csv"),
        )
        report = {
            "dataset": cfg.problem.dataset,
            "problem_kind": cfg.problem.kind,
            "seed": cfg.problem.seed,
            "arms": {name: _jsonable(r.report) for name, r in results.items()},
        }
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return results


def _safe_name(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "-" for c in name)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


# --------------------------------------------------------------------------
# serialization (6 significant digits, '.' decimal separator, '\n' endings)


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.6g}"


def write_records(records, path) -> None:
    """Write iteration records; an empty list produces a header-only file."""
    lines = [RECORD_HEADER]
    for r in records:
        lines.append(
            f"{r.k},{_fmt(r.train_loss)},{_fmt(r.val_loss)},{_fmt(r.step_norm)},"
            f"{r.clamp_hits},{_fmt(r.elapsed_s)}"
        )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_records(path) -> list:
    """Read a record CSV written by :func:`write_records`."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != RECORD_HEADER:
            raise ValueError(f"unexpected record header in {path}: {header!r}")
        records = []
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) != 6:
                raise ValueError(f"malformed record line in {path}: {line!r}")
            records.append(
                RunRecord(
                    k=int(parts[0]),
                    train_loss=float(parts[1]),
                    val_loss=float(parts[2]),
                    step_norm=float(parts[3]),
                    clamp_hits=int(parts[4]),
                    elapsed_s=float(parts[5]),
                )
            )
    return records


def write_summary(rows, path) -> None:
    """Write the dataset/algorithm summary table (8 fixed columns)."""
    lines = [SUMMARY_HEADER]
    for row in rows:
        lines.append(
            f"{row.dataset},{row.algorithm},{_fmt(row.median_pos_m)},{_fmt(row.mean_pos_m)},"
            f"{_fmt(row.median_rot_deg)},{_fmt(row.mean_rot_deg)},{_fmt(row.s_p)},{_fmt(row.s_q)}"
        )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_summary(path) -> list:
    """Read a summary CSV written by :func:`write_summary`."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != SUMMARY_HEADER:
            raise ValueError(f"unexpected summary header in {path}: {header!r}")
        rows = []
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) != 8:
                raise ValueError(f"malformed summary line in {path}: {line!r}")
            rows.append(
                SummaryRow(
                    dataset=parts[0],
                    algorithm=parts[1],
                    median_pos_m=float(parts[2]),
                    mean_pos_m=float(parts[3]),
                    median_rot_deg=float(parts[4]),
                    mean_rot_deg=float(parts[5]),
                    s_p=float(parts[6]),
                    s_q=float(parts[7]),
                )
            )
    return rows


def emit_curves(records_by_arm: dict, path) -> None:
    """Write train/validation loss series for every arm into one long CSV.

    Output is byte-stable for identical inputs: rows follow the dict's
    insertion order, then iteration order.
    """
    lines = [CURVE_HEADER]
    for arm, records in records_by_arm.items():
        for r in records:
            lines.append(f"{arm},{r.k},{_fmt(r.train_loss)},{_fmt(r.val_loss)}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")

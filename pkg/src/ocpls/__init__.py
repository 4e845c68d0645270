"""Curvature-scaled stochastic optimizers with rate diagnostics.

The package centers on a second-order method that scales debiased gradient
averages by a diagonal curvature estimate through a truncated geometric
series, plus the baselines, synthetic problems, pose-regression task and
benchmarking harness used to exercise it.
"""

from .bench import (
    ArmSpec,
    ConfigError,
    ExperimentConfig,
    ProblemSpec,
    RunRecord,
    RunSpec,
    SummaryRow,
    build_problem,
    emit_curves,
    load_config,
    read_records,
    read_summary,
    run_experiment,
    save_config,
    write_records,
    write_summary,
)
from .curvature import (
    CurvatureEstimate,
    ResidualModel,
    exact_gn_diagonal,
    gnb_mse_estimate,
    gnb_per_sample_estimate,
    sample_synthetic_labels,
    simplified_hessian,
)
from .metrics import ErrorSummary, position_error, rotation_error, summarize
from .optimizers import (
    STABILITY_DELTA,
    AdamW,
    GradientOptimizer,
    OcpLs,
    OptimizerState,
    Sophia,
    bias_correct,
    clamp_curvature,
    ema_update,
    make_optimizer,
    phi_closed_form,
    phi_recursion,
)
from .pose import (
    Pose,
    PoseRegressor,
    PoseTask,
    Scene,
    TinyRegressor,
    load_scene_csv,
    make_synthetic_scene,
    pose_loss,
    pose_loss_grad,
    save_scene_csv,
)
from .problems import LinearModel, QuadraticProblem, RosenbrockProblem, rosenbrock_eval
from .theory import (
    RateReport,
    check_a3,
    estimate_beta,
    estimate_mu_pl,
    fit_empirical_rate,
    rho_infinity,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # optimizers
    "STABILITY_DELTA",
    "GradientOptimizer",
    "OcpLs",
    "AdamW",
    "Sophia",
    "OptimizerState",
    "make_optimizer",
    "clamp_curvature",
    "ema_update",
    "bias_correct",
    "phi_closed_form",
    "phi_recursion",
    # curvature
    "CurvatureEstimate",
    "ResidualModel",
    "simplified_hessian",
    "sample_synthetic_labels",
    "gnb_mse_estimate",
    "gnb_per_sample_estimate",
    "exact_gn_diagonal",
    # problems
    "QuadraticProblem",
    "RosenbrockProblem",
    "rosenbrock_eval",
    "LinearModel",
    # pose task
    "Pose",
    "Scene",
    "TinyRegressor",
    "PoseTask",
    "PoseRegressor",
    "make_synthetic_scene",
    "save_scene_csv",
    "load_scene_csv",
    "pose_loss",
    "pose_loss_grad",
    # metrics
    "ErrorSummary",
    "position_error",
    "rotation_error",
    "summarize",
    # theory
    "RateReport",
    "rho_infinity",
    "check_a3",
    "estimate_beta",
    "estimate_mu_pl",
    "fit_empirical_rate",
    # bench
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

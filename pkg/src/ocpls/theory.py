"""Convergence-theory checks for the truncated-series optimizer.

The optimizer's linear-rate guarantee is stated for objectives that are
beta-smooth (A1), gradient dominated with constant mu (A2), and whose running
curvature estimates keep every coordinate of (1 - alpha * H)^(k+1) below one
(A3), with the constants tied together by beta < 2 * alpha and
mu <= alpha * beta / (2 * alpha - beta). Under those conditions the predicted
asymptotic contraction factor of the optimality gap is

    rho_inf = 1 - (2 * mu * alpha - mu * beta) / (alpha * beta),

which lies in [0, 1). This module evaluates that prediction, estimates the
constants from problems and trajectories, audits the A3 condition on iterate
data, and fits the empirical rate of a recorded gap sequence for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "RateReport",
    "rho_infinity",
    "check_a3",
    "estimate_beta",
    "estimate_mu_pl",
    "fit_empirical_rate",
]


@dataclass(frozen=True)
class RateReport:
    """Constants, predicted rate and fitted rate for one optimizer run."""

    beta_est: float
    mu_pl_est: float
    rho_pred: float
    rho_fit: float
    fit_r2: float
    a3_violation_count: int


def rho_infinity(alpha: float, beta: float, mu: float) -> float:
    """Predicted asymptotic contraction factor of the optimality gap.

    Raises ValueError naming the violated inequality when the constants are
    outside the regime the prediction is derived for.
    """
    if not alpha > 0:
        raise ValueError(f"constants invalid: alpha > 0 fails (alpha = {alpha})")
    if not beta > 0:
        raise ValueError(f"constants invalid: beta > 0 fails (beta = {beta})")
    if not mu > 0:
        raise ValueError(f"constants invalid: mu > 0 fails (mu = {mu})")
    if not beta < 2.0 * alpha:
        raise ValueError(
            f"constants invalid: beta < 2*alpha fails (beta = {beta}, 2*alpha = {2.0 * alpha})"
        )
    bound = alpha * beta / (2.0 * alpha - beta)
    if mu > bound:
        raise ValueError(
            f"constants invalid: mu <= alpha*beta/(2*alpha - beta) fails "
            f"(mu = {mu}, bound = {bound})"
        )
    return 1.0 - (2.0 * mu * alpha - mu * beta) / (alpha * beta)


def check_a3(h_hat: np.ndarray, alpha: float, k: int) -> tuple[bool, int, float]:
    """Audit |1 - alpha * h_i|^(k+1) < 1 per coordinate at step index k.

    Returns (holds, worst_index, worst_value). Overflowing powers are reported
    as inf, which simply fails the check.
    """
    if k < 0:
        raise ValueError(f"step index must be nonnegative, got {k}")
    h_hat = np.asarray(h_hat, dtype=np.float64)
    with np.errstate(over="ignore"):
        values = np.abs(1.0 - alpha * h_hat) ** (k + 1)
    worst = int(np.argmax(values))
    worst_value = float(values[worst])
    return bool(worst_value < 1.0), worst, worst_value


def estimate_beta(
    problem,
    n_pairs: int = 64,
    seed: int = 0,
    radius: float = 2.0,
    prefer_exact: bool = True,
) -> float:
    """Smoothness estimate: max sampled gradient-difference ratio.

    Problems that know their exact constant (quadratics expose ``smoothness``)
    short-circuit when ``prefer_exact`` is set. The sampled path draws point
    pairs from one sequential stream, so for a fixed seed the estimate is
    nondecreasing in ``n_pairs`` and is always a lower bound on the true
    Lipschitz constant.
    """
    if prefer_exact and hasattr(problem, "smoothness"):
        return float(problem.smoothness)
    if n_pairs < 1:
        raise ValueError(f"n_pairs must be positive, got {n_pairs}")
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(n_pairs):
        x = rng.uniform(-radius, radius, size=problem.dim)
        y = x + rng.normal(scale=radius / 4.0, size=problem.dim)
        dx = np.linalg.norm(y - x)
        if dx == 0:
            continue
        gx = problem.eval(x)[1]
        gy = problem.eval(y)[1]
        best = max(best, float(np.linalg.norm(gy - gx) / dx))
    if best == 0.0:
        raise ValueError("could not estimate smoothness: all sampled gradients agree")
    return best


def estimate_mu_pl(problem, trajectory) -> float:
    """Gradient-domination estimate: min over iterates of 0.5*|g|^2 / (f - f*).

    Points within 1e-12 of the optimal value are skipped; if every point is
    that close, there is nothing to estimate and a ValueError is raised.
    """
    best = np.inf
    for x in trajectory:
        f, g = problem.eval(x)
        gap = f - problem.f_star
        if gap < 1e-12:
            continue
        best = min(best, 0.5 * float(g @ g) / gap)
    if not np.isfinite(best):
        raise ValueError("every trajectory point is at the optimum; cannot estimate mu")
    return float(best)


def fit_empirical_rate(gaps) -> tuple[float, float]:
    """Least-squares fit of log(gap) vs iteration over the final half.

    Returns (rho_fit, r_squared) with rho_fit = exp(slope). Needs at least 10
    gaps, all strictly positive. A constant sequence fits exactly with slope
    zero, so it reports (1.0, 1.0).
    """
    gaps = np.asarray(gaps, dtype=np.float64)
    if gaps.ndim != 1 or gaps.shape[0] < 10:
        raise ValueError("need a 1-D sequence of at least 10 gap values")
    if np.any(gaps <= 0):
        raise ValueError("gaps must be strictly positive to fit a log-linear rate")
    start = gaps.shape[0] // 2
    k = np.arange(start, gaps.shape[0], dtype=np.float64)
    log_gap = np.log(gaps[start:])
    slope, intercept = np.polyfit(k, log_gap, 1)
    residuals = log_gap - (slope * k + intercept)
    ss_tot = float(np.sum((log_gap - log_gap.mean()) ** 2))
    # A constant tail leaves ss_tot at the scale of mean-rounding noise, not
    # exactly zero; below that floor the sequence is flat and the fit trivial.
    noise_floor = (1e-12 * max(1.0, abs(float(log_gap.mean())))) ** 2 * log_gap.shape[0]
    if ss_tot <= noise_floor:
        return 1.0, 1.0
    r2 = 1.0 - float(np.sum(residuals**2)) / ss_tot
    return float(np.exp(slope)), float(r2)

"""Diagonally preconditioned stochastic optimizers sharing one step contract.

The central method here is OCP-LS: a second-order update whose preconditioner
is a truncated geometric series in (I - alpha * H), applied to debiased moving
averages of the gradient and of a diagonal curvature estimate. With the series
summed in closed form the step on coordinate i is

    phi_i = (1 - r_i ** (k + 1)) * g_i / h_i,   r_i = 1 - alpha * h_i,

which interpolates between a plain scaled-gradient step at k = 0 and a full
diagonal Newton step as k grows (when |r_i| < 1). Two baselines, AdamW and a
Sophia-style clipped-Newton method, implement the same functional step
interface so the benchmark harness can swap them freely.

All three optimizers are stateless objects holding hyperparameters only
(scikit-learn estimator conventions, so ``get_params`` / ``clone`` work); the
per-run state travels through ``step`` as an immutable ``OptimizerState``.

Numerical note on the moment estimates: the state stores the *debiased*
moving averages directly, updated as a convex combination

    avg_k = avg_{k-1} + (1 - w_k) * (value_k - avg_{k-1}),
    w_k   = beta * (1 - beta^(k-1)) / (1 - beta^k),

which is algebraically identical to keeping a zero-initialised EMA and
dividing by (1 - beta^k), but is exact for constant input streams instead of
accumulating one rounding per step.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator

from .vectors import validate_vector

__all__ = [
    "STABILITY_DELTA",
    "OptimizerState",
    "clamp_curvature",
    "ema_update",
    "bias_correct",
    "phi_closed_form",
    "phi_recursion",
    "stability_clamp_count",
    "OcpLs",
    "AdamW",
    "Sophia",
    "make_optimizer",
]

# The series ratio r = 1 - alpha * h is clamped into [-1 + delta, 1 - delta]:
# without this, alpha * h > 2 makes r ** (k + 1) explode with k.
STABILITY_DELTA = 1e-8

INNER_MODES = ("closed_form", "recursion")


@dataclass(frozen=True)
class OptimizerState:
    """Per-run optimizer state; plain data, never mutated in place.

    ``g_avg`` and ``h_avg`` are the debiased moving averages of the gradient
    and the clamped curvature diagonal (see the module docstring for the
    update rule). ``k`` counts completed steps, starting at 0 before the first
    step. ``clamp_hits`` accumulates how many coordinate clamps of the series
    ratio have bound so far in the run.
    """

    g_avg: np.ndarray
    h_avg: np.ndarray
    k: int = 0
    clamp_hits: int = 0


def clamp_curvature(h: np.ndarray, floor: float) -> np.ndarray:
    """Elementwise max(h, floor); the floor must be strictly positive."""
    if not floor > 0:
        raise ValueError(f"curvature floor must be positive, got {floor}")
    return np.maximum(h, floor)


def _advance_average(avg: np.ndarray, value: np.ndarray, beta: float, k_new: int) -> np.ndarray:
    """One debiased moving-average update; k_new is the 1-based step count."""
    if beta == 0.0 or k_new == 1:
        return value.copy()
    w = beta * (1.0 - beta ** (k_new - 1)) / (1.0 - beta ** k_new)
    return avg + (1.0 - w) * (value - avg)


def ema_update(
    state: OptimizerState,
    g: np.ndarray,
    h_clamped: np.ndarray,
    beta1: float,
    beta2: float,
) -> OptimizerState:
    """Fold a new gradient and curvature sample into the state; increments k."""
    if g.shape != state.g_avg.shape or h_clamped.shape != state.h_avg.shape:
        raise ValueError("gradient/curvature shape does not match optimizer state")
    k_new = state.k + 1
    return OptimizerState(
        g_avg=_advance_average(state.g_avg, g, beta1, k_new),
        h_avg=_advance_average(state.h_avg, h_clamped, beta2, k_new),
        k=k_new,
        clamp_hits=state.clamp_hits,
    )


def bias_correct(state: OptimizerState) -> tuple[np.ndarray, np.ndarray]:
    """Bias-corrected moment estimates (g_hat, h_hat) for the current step.

    Undefined before the first update: at k = 0 the correction would divide
    by 1 - beta^0 = 0, so the step counter must already have been advanced.
    The state representation keeps the averages debiased incrementally, so
    this is a checked projection rather than a division.
    """
    if state.k < 1:
        raise ValueError("bias correction is undefined at k = 0; run an update first")
    return state.g_avg, state.h_avg


def phi_closed_form(g_hat: np.ndarray, h_hat: np.ndarray, alpha: float, k: int) -> np.ndarray:
    """Closed-form truncated-series step: (1 - r**(k+1)) * g_hat / h_hat.

    r = 1 - alpha * h_hat is clamped into [-1 + delta, 1 - delta] before the
    power is taken; where no clamp binds this equals ``phi_recursion`` with
    the same exponent. k = 0 reduces to alpha * g_hat.
    """
    if k < 0:
        raise ValueError(f"series exponent must be nonnegative, got {k}")
    if np.any(h_hat <= 0):
        raise ValueError("curvature estimate must be strictly positive")
    r = 1.0 - alpha * h_hat
    r = np.clip(r, -1.0 + STABILITY_DELTA, 1.0 - STABILITY_DELTA)
    return (1.0 - r ** (k + 1)) * g_hat / h_hat


def phi_recursion(g_hat: np.ndarray, h_hat: np.ndarray, alpha: float, n_steps: int) -> np.ndarray:
    """Literal series recursion phi_l = alpha*g + (1 - alpha*h) * phi_{l-1}.

    Starts at phi_0 = alpha * g_hat and applies ``n_steps`` refinements. No
    stability clamp is applied, so coordinates with |1 - alpha*h| >= 1 diverge
    as n_steps grows; a non-finite result raises FloatingPointError.
    """
    if n_steps < 0:
        raise ValueError(f"refinement count must be nonnegative, got {n_steps}")
    if np.any(h_hat <= 0):
        raise ValueError("curvature estimate must be strictly positive")
    base = alpha * g_hat
    damp = 1.0 - alpha * h_hat
    phi = base.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n_steps):
            phi = base + damp * phi
    if not np.all(np.isfinite(phi)):
        raise FloatingPointError(
            "series recursion diverged: some coordinate has |1 - alpha*h| >= 1"
        )
    return phi


def stability_clamp_count(h_hat: np.ndarray, alpha: float) -> int:
    """How many coordinates of r = 1 - alpha*h fall outside the clamp interval."""
    r = 1.0 - alpha * h_hat
    return int(np.count_nonzero(np.abs(r) > 1.0 - STABILITY_DELTA))


class GradientOptimizer(BaseEstimator):
    """Shared base: hyperparameters on the instance, run state passed through."""

    def init_state(self, n_params: int) -> OptimizerState:
        """Fresh zeroed state for a parameter vector of length ``n_params``."""
        self._check_params()
        n = int(n_params)
        if n <= 0:
            raise ValueError(f"parameter count must be positive, got {n_params}")
        return OptimizerState(g_avg=np.zeros(n), h_avg=np.zeros(n))

    def step(
        self, state: OptimizerState, x: np.ndarray, g: np.ndarray
    ) -> tuple[np.ndarray, OptimizerState]:
        raise NotImplementedError

    def _check_params(self) -> None:
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        for name in ("beta1", "beta2"):
            b = getattr(self, name)
            if not 0.0 <= b < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {b}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be nonnegative, got {self.weight_decay}")

    def _check_step_inputs(self, state: OptimizerState, x: np.ndarray, g: np.ndarray) -> None:
        if x.shape != g.shape:
            raise ValueError(f"shape mismatch: parameters {x.shape} vs gradient {g.shape}")
        if state.g_avg.shape != x.shape:
            raise ValueError("optimizer state was initialised for a different size")
        validate_vector(x, "parameters")
        validate_vector(g, "gradient")


class OcpLs(GradientOptimizer):
    """Truncated-series second-order optimizer.

    Per step: the curvature diagonal is estimated as g * g (or by
    ``curvature_fn`` when given), floored at ``clamp_floor``, folded into the
    moving averages, and the update phi is computed with series exponent
    min(k, inner_cap) where k counts previously completed steps. The new
    parameters are x * (1 - alpha * weight_decay) - phi.

    Parameters
    ----------
    alpha : step size, also the series scale M = alpha * I.
    beta1, beta2 : decay rates of the gradient / curvature averages.
    weight_decay : decoupled decay coefficient lambda.
    clamp_floor : lower bound applied to the raw curvature diagonal.
    inner_mode : "closed_form" (clamped, production path) or "recursion"
        (literal series, diverges where |1 - alpha*h| >= 1).
    inner_cap : cap on the series exponent; None means uncapped.
    curvature_fn : optional g -> diagonal override for the curvature source.
    """

    def __init__(
        self,
        alpha: float = 0.1,
        beta1: float = 0.9,
        beta2: float = 0.999,
        weight_decay: float = 0.0,
        clamp_floor: float = 1e-8,
        inner_mode: str = "closed_form",
        inner_cap: int | None = 10,
        curvature_fn=None,
    ):
        self.alpha = alpha
        self.beta1 = beta1
        self.beta2 = beta2
        self.weight_decay = weight_decay
        self.clamp_floor = clamp_floor
        self.inner_mode = inner_mode
        self.inner_cap = inner_cap
        self.curvature_fn = curvature_fn

    def _check_params(self) -> None:
        super()._check_params()
        if not self.clamp_floor > 0:
            raise ValueError(f"clamp_floor must be positive, got {self.clamp_floor}")
        if self.inner_mode not in INNER_MODES:
            raise ValueError(f"inner_mode must be one of {INNER_MODES}, got {self.inner_mode!r}")
        if self.inner_cap is not None and (self.inner_cap < 1 or self.inner_cap != int(self.inner_cap)):
            raise ValueError(f"inner_cap must be a positive integer or None, got {self.inner_cap!r}")

    def step(self, state, x, g):
        self._check_step_inputs(state, x, g)
        h_raw = g * g if self.curvature_fn is None else self.curvature_fn(g)
        h = clamp_curvature(h_raw, self.clamp_floor)
        new_state = ema_update(state, g, h, self.beta1, self.beta2)
        g_hat, h_hat = bias_correct(new_state)
        exponent = state.k if self.inner_cap is None else min(state.k, int(self.inner_cap))
        if self.inner_mode == "closed_form":
            phi = phi_closed_form(g_hat, h_hat, self.alpha, exponent)
        else:
            phi = phi_recursion(g_hat, h_hat, self.alpha, exponent)
        hits = new_state.clamp_hits + stability_clamp_count(h_hat, self.alpha)
        x_new = x * (1.0 - self.alpha * self.weight_decay) - phi
        return x_new, replace(new_state, clamp_hits=hits)


class AdamW(GradientOptimizer):
    """Adam with decoupled weight decay; the first-order baseline."""

    def __init__(
        self,
        alpha: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        weight_decay: float = 0.0,
        eps: float = 1e-8,
    ):
        self.alpha = alpha
        self.beta1 = beta1
        self.beta2 = beta2
        self.weight_decay = weight_decay
        self.eps = eps

    def _check_params(self) -> None:
        super()._check_params()
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")

    def step(self, state, x, g):
        self._check_step_inputs(state, x, g)
        new_state = ema_update(state, g, g * g, self.beta1, self.beta2)
        m_hat, v_hat = bias_correct(new_state)
        update = self.alpha * m_hat / (np.sqrt(v_hat) + self.eps)
        x_new = x * (1.0 - self.alpha * self.weight_decay) - update
        return x_new, new_state


class Sophia(GradientOptimizer):
    """Clipped diagonal-Newton baseline with the same squared-gradient curvature.

    The update is alpha * clip(g_hat / max(h_hat, eps), +-rho_clip): inside the
    clip region this is a diagonal Newton step scaled by alpha; when the
    curvature collapses to eps and the gradient is large, the step saturates
    at alpha * rho_clip per coordinate.
    """

    def __init__(
        self,
        alpha: float = 0.05,
        beta1: float = 0.9,
        beta2: float = 0.99,
        weight_decay: float = 0.0,
        eps: float = 1e-12,
        rho_clip: float = 0.1,
    ):
        self.alpha = alpha
        self.beta1 = beta1
        self.beta2 = beta2
        self.weight_decay = weight_decay
        self.eps = eps
        self.rho_clip = rho_clip

    def _check_params(self) -> None:
        super()._check_params()
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not self.rho_clip > 0:
            raise ValueError(f"rho_clip must be positive, got {self.rho_clip}")

    def step(self, state, x, g):
        self._check_step_inputs(state, x, g)
        new_state = ema_update(state, g, g * g, self.beta1, self.beta2)
        g_hat, h_hat = bias_correct(new_state)
        ratio = np.clip(g_hat / np.maximum(h_hat, self.eps), -self.rho_clip, self.rho_clip)
        x_new = x * (1.0 - self.alpha * self.weight_decay) - self.alpha * ratio
        return x_new, new_state


_OPTIMIZERS = {"ocp-ls": OcpLs, "adamw": AdamW, "sophia": Sophia}


def make_optimizer(name: str, **params) -> GradientOptimizer:
    """Build an optimizer by its harness name: 'ocp-ls', 'adamw' or 'sophia'."""
    try:
        cls = _OPTIMIZERS[name]
    except KeyError:
        raise ValueError(
            f"unknown optimizer {name!r}, expected one of {sorted(_OPTIMIZERS)}"
        ) from None
    return cls(**params)

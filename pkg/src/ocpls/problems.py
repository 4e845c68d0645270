"""Analytic test problems: quadratics with known spectra, Rosenbrock, and a
linear residual model used as the ground truth for the curvature estimators.

Each optimization problem exposes ``eval(x) -> (f, g)`` plus a ``dim``
attribute; quadratics additionally know their optimum, their curvature bounds
and a cancellation-free optimality gap, which the convergence-rate checks
rely on.
"""

from __future__ import annotations

import numpy as np

from .curvature import ResidualModel
from .vectors import as_param_vector, validate_vector

__all__ = [
    "QuadraticProblem",
    "rosenbrock_eval",
    "RosenbrockProblem",
    "LinearModel",
]


class QuadraticProblem:
    """f(x) = 0.5 x'Ax - b'x + 0.5*reg*|x|^2 with A symmetric positive definite.

    ``matrix`` may be a dense (d, d) array or a length-d vector of diagonal
    entries. The optimum, the smoothness constant (largest curvature
    eigenvalue) and the gradient-domination constant (smallest one) are
    computed once at construction.
    """

    def __init__(self, matrix, b, reg: float = 0.0):
        matrix = np.asarray(matrix, dtype=np.float64)
        self.b = as_param_vector(b)
        if reg < 0:
            raise ValueError(f"regularizer must be nonnegative, got {reg}")
        self.reg = float(reg)
        if matrix.ndim == 1:
            if matrix.shape[0] != self.b.shape[0]:
                raise ValueError("diagonal length does not match b")
            self.diag = matrix
            self.matrix = None
            eigs = np.sort(matrix)
        elif matrix.ndim == 2:
            if matrix.shape[0] != matrix.shape[1] or matrix.shape[0] != self.b.shape[0]:
                raise ValueError(f"matrix shape {matrix.shape} does not match b")
            if not np.allclose(matrix, matrix.T, atol=1e-12):
                raise ValueError("matrix must be symmetric")
            self.diag = None
            self.matrix = matrix
            eigs = np.linalg.eigvalsh(matrix)
        else:
            raise ValueError(f"matrix must be 1-D or 2-D, got shape {matrix.shape}")
        if eigs[0] + self.reg <= 0:
            raise ValueError("problem is not strongly convex: smallest curvature <= 0")
        self.lambda_min = float(eigs[0])
        self.lambda_max = float(eigs[-1])
        self.dim = self.b.shape[0]
        self.x_star = self._solve(self.b)
        self.f_star = float(self.eval(self.x_star)[0])

    def _apply(self, x: np.ndarray) -> np.ndarray:
        base = self.diag * x if self.matrix is None else self.matrix @ x
        return base + self.reg * x if self.reg else base

    def _solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.matrix is None:
            return rhs / (self.diag + self.reg)
        return np.linalg.solve(self.matrix + self.reg * np.eye(self.dim), rhs)

    def eval(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        """Objective value and gradient at x."""
        x = as_param_vector(x)
        validate_vector(x, "x")
        ax = self.diag * x if self.matrix is None else self.matrix @ x
        f = 0.5 * x @ ax - self.b @ x
        g = ax - self.b
        if self.reg:
            f += 0.5 * self.reg * (x @ x)
            g = g + self.reg * x
        return float(f), g

    def gap(self, x: np.ndarray) -> float:
        """f(x) - f* computed as a quadratic form around the optimum.

        This form stays accurate when the gap is far below |f*|, where the
        direct difference would be dominated by cancellation.
        """
        z = as_param_vector(x) - self.x_star
        return float(0.5 * z @ self._apply(z))

    @property
    def smoothness(self) -> float:
        """Gradient Lipschitz constant: largest eigenvalue plus the regularizer."""
        return self.lambda_max + self.reg

    @property
    def pl_constant(self) -> float:
        """Gradient-domination constant: smallest eigenvalue plus the regularizer."""
        return self.lambda_min + self.reg

    @classmethod
    def random(
        cls,
        dim: int,
        lambda_min: float = 1.0,
        lambda_max: float = 4.0,
        seed: int = 0,
        reg: float = 0.0,
        rotate: bool = True,
    ) -> "QuadraticProblem":
        """Random instance with eigenvalues spanning [lambda_min, lambda_max].

        The spectrum always includes both endpoints. With ``rotate`` a random
        orthogonal basis is applied; otherwise the matrix stays diagonal.
        """
        if dim < 1:
            raise ValueError(f"dim must be positive, got {dim}")
        if not 0 < lambda_min <= lambda_max:
            raise ValueError("need 0 < lambda_min <= lambda_max")
        rng = np.random.default_rng(seed)
        eigs = np.linspace(lambda_min, lambda_max, dim) if dim > 1 else np.array([lambda_min])
        b = rng.normal(size=dim)
        if rotate and dim > 1:
            q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
            return cls(q @ np.diag(eigs) @ q.T, b, reg=reg)
        return cls(eigs, b, reg=reg)


def rosenbrock_eval(x: np.ndarray) -> tuple[float, np.ndarray]:
    """Chained Rosenbrock value and gradient; needs dimension >= 2."""
    x = as_param_vector(x)
    if x.shape[0] < 2:
        raise ValueError("rosenbrock needs at least 2 dimensions")
    head, tail = x[:-1], x[1:]
    t = tail - head ** 2
    f = float(np.sum(100.0 * t ** 2 + (1.0 - head) ** 2))
    g = np.zeros_like(x)
    g[:-1] = -400.0 * head * t - 2.0 * (1.0 - head)
    g[1:] += 200.0 * t
    return f, g


class RosenbrockProblem:
    """Object wrapper around :func:`rosenbrock_eval` for the harness interface."""

    def __init__(self, dim: int = 2):
        if dim < 2:
            raise ValueError("rosenbrock needs at least 2 dimensions")
        self.dim = int(dim)
        self.x_star = np.ones(self.dim)
        self.f_star = 0.0

    def eval(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        return rosenbrock_eval(x)

    def gap(self, x: np.ndarray) -> float:
        return self.eval(x)[0] - self.f_star


class LinearModel(ResidualModel):
    """Linear predictions l_n(x) = rows[n] . x; the curvature oracle target.

    The Jacobian is the row matrix itself, so the exact mean Gauss-Newton
    diagonal is just the column-wise mean of squared entries.
    """

    def __init__(self, rows):
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2:
            raise ValueError(f"rows must be a 2-D sample-by-feature array, got {rows.shape}")
        self.rows = rows

    def _select(self, idx):
        return self.rows if idx is None else self.rows[idx]

    def predict(self, x: np.ndarray, idx=None) -> np.ndarray:
        return self._select(idx) @ x

    def jacobian(self, x: np.ndarray, idx=None) -> np.ndarray:
        return self._select(idx)

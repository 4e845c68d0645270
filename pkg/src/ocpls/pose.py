"""Synthetic camera-pose regression: the desk-scale training problem.

A pose is a 3-D position in meters plus a unit scalar-first quaternion. The
training objective is a homoscedastic-uncertainty weighted sum of two mean
absolute errors,

    loss = exp(-s_p) * L_p + s_p + exp(-s_q) * L_q + s_q,

where L_p averages |predicted - true| over position coordinates, L_q does the
same over the coordinates of the length-normalised predicted quaternion, and
the weights s_p, s_q are trained jointly with the regressor. The full
parameter vector is therefore [network weights, s_p, s_q].

Scenes are synthetic: poses are sampled from a smooth closed trajectory and
features are a fixed random linear-plus-tanh embedding of the pose, with
optional Gaussian feature noise. Everything is deterministic given the seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, clone
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import metrics
from .optimizers import OcpLs
from .vectors import as_param_vector, validate_vector

__all__ = [
    "Pose",
    "PoseSample",
    "Scene",
    "make_synthetic_scene",
    "save_scene_csv",
    "load_scene_csv",
    "TinyRegressor",
    "pose_loss",
    "pose_loss_grad",
    "PoseTask",
    "PoseRegressor",
]

POSE_COLUMNS = ("px", "py", "pz", "qw", "qx", "qy", "qz")


@dataclass(frozen=True)
class Pose:
    """Position in meters and a unit scalar-first quaternion."""

    position: np.ndarray
    quaternion: np.ndarray


@dataclass(frozen=True)
class PoseSample:
    """One training sample: a feature vector and its ground-truth pose."""

    feature: np.ndarray
    pose: Pose


class Scene:
    """A set of pose samples stored as arrays for vectorised training."""

    def __init__(self, features: np.ndarray, positions: np.ndarray, quaternions: np.ndarray):
        features = np.asarray(features, dtype=np.float64)
        positions = np.asarray(positions, dtype=np.float64)
        quaternions = np.asarray(quaternions, dtype=np.float64)
        n = features.shape[0]
        if features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {features.shape}")
        if positions.shape != (n, 3):
            raise ValueError(f"positions must have shape ({n}, 3), got {positions.shape}")
        if quaternions.shape != (n, 4):
            raise ValueError(f"quaternions must have shape ({n}, 4), got {quaternions.shape}")
        self.features = features
        self.positions = positions
        self.quaternions = quaternions

    def __len__(self) -> int:
        return self.features.shape[0]

    def __getitem__(self, i: int) -> PoseSample:
        return PoseSample(
            feature=self.features[i],
            pose=Pose(position=self.positions[i], quaternion=self.quaternions[i]),
        )

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


def _euler_to_quaternion(roll: np.ndarray, pitch: np.ndarray, yaw: np.ndarray) -> np.ndarray:
    """Scalar-first quaternions from intrinsic roll-pitch-yaw angles."""
    cr, sr = np.cos(roll / 2), np.sin(roll / 2)
    cp, sp = np.cos(pitch / 2), np.sin(pitch / 2)
    cy, sy = np.cos(yaw / 2), np.sin(yaw / 2)
    q = np.stack(
        [
            cr * cp * cy + sr * sp * sy,
            sr * cp * cy - cr * sp * sy,
            cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy,
        ],
        axis=-1,
    )
    return q


def canonical_hemisphere(quaternions: np.ndarray) -> np.ndarray:
    """Flip quaternion signs so the scalar part is nonnegative.

    q and -q encode the same rotation; storing ground truth on one hemisphere
    keeps the L1 quaternion residual meaningful.
    """
    q = np.array(quaternions, dtype=np.float64, copy=True)
    flip = q[..., 0] < 0
    q[flip] = -q[flip]
    return q


def make_synthetic_scene(
    n_train: int,
    n_val: int,
    noise_sigma: float = 0.0,
    seed: int = 0,
    feature_dim: int = 16,
) -> tuple[Scene, Scene]:
    """Sample a train/val scene pair from one smooth synthetic trajectory.

    Poses lie on a closed desk-scale loop; features are a fixed random
    linear-plus-tanh embedding of the 7-vector [position, quaternion] with
    additive Gaussian noise of scale ``noise_sigma``. The trajectory, the
    embedding and the noise each draw from their own child stream of ``seed``,
    so changing ``noise_sigma`` rescales the identical noise realisation
    without disturbing the poses.
    """
    if n_train < 1 or n_val < 0:
        raise ValueError("need n_train >= 1 and n_val >= 0")
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be nonnegative, got {noise_sigma}")
    seq_traj, seq_embed, seq_noise = np.random.SeedSequence(seed).spawn(3)
    rng_traj = np.random.default_rng(seq_traj)
    rng_embed = np.random.default_rng(seq_embed)
    rng_noise = np.random.default_rng(seq_noise)

    n = n_train + n_val
    t = rng_traj.uniform(0.0, 2.0 * np.pi, size=n)
    positions = np.stack(
        [2.0 * np.cos(t), 2.0 * np.sin(t), 0.6 * np.sin(2.0 * t)], axis=1
    )
    quaternions = canonical_hemisphere(
        _euler_to_quaternion(0.2 * np.cos(3.0 * t), 0.3 * np.sin(2.0 * t), t)
    )

    raw = np.hstack([positions, quaternions])
    m_lin = rng_embed.normal(size=(feature_dim, 7)) / np.sqrt(7.0)
    m_tanh = rng_embed.normal(size=(feature_dim, 7)) / np.sqrt(7.0)
    bias = 0.1 * rng_embed.normal(size=feature_dim)
    clean = raw @ m_lin.T + np.tanh(raw @ m_tanh.T + bias)
    features = clean + noise_sigma * rng_noise.standard_normal((n, feature_dim))

    def scene(sl):
        return Scene(features[sl], positions[sl], quaternions[sl])

    return scene(slice(0, n_train)), scene(slice(n_train, n))


def save_scene_csv(scene: Scene, path) -> None:
    """Write one row per sample: feature components, then position, then quaternion."""
    header = [f"f{i}" for i in range(scene.n_features)] + list(POSE_COLUMNS)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(len(scene)):
            row = np.concatenate([scene.features[i], scene.positions[i], scene.quaternions[i]])
            writer.writerow([f"{v:.17g}" for v in row])


def load_scene_csv(path) -> Scene:
    """Read a scene written by :func:`save_scene_csv`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if len(header) < 8 or tuple(header[-7:]) != POSE_COLUMNS:
            raise ValueError(f"unexpected scene CSV header in {path}")
        rows = np.array([[float(v) for v in row] for row in reader], dtype=np.float64)
    if rows.size == 0:
        raise ValueError(f"scene CSV {path} has no samples")
    return Scene(rows[:, :-7], rows[:, -7:-4], rows[:, -4:])


class TinyRegressor:
    """Small fully connected tanh network mapping features to a 7-vector.

    Weights live in a single flat vector (the first ``n_weights`` entries of
    the task's parameter vector); ``unpack`` returns per-layer views into it,
    so the forward and backward passes never copy parameters.
    """

    def __init__(self, n_features: int = 16, hidden=(64, 64), activation: str = "tanh"):
        if n_features < 1:
            raise ValueError(f"n_features must be positive, got {n_features}")
        hidden = tuple(int(h) for h in hidden)
        if any(h < 1 for h in hidden):
            raise ValueError(f"hidden sizes must be positive, got {hidden}")
        if activation != "tanh":
            raise ValueError(f"only tanh hidden activations are supported, got {activation!r}")
        self.n_features = int(n_features)
        self.hidden = hidden
        self.activation = activation
        self.n_outputs = 7
        self.layer_sizes = (self.n_features, *hidden, self.n_outputs)
        self.n_weights = sum(
            fan_in * fan_out + fan_out
            for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:])
        )

    def init_weights(self, rng: np.random.Generator) -> np.ndarray:
        """Gaussian weights scaled by 1/sqrt(fan_in); zero biases."""
        chunks = []
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            chunks.append(rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=fan_in * fan_out))
            chunks.append(np.zeros(fan_out))
        return np.concatenate(chunks)

    def unpack(self, w: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per-layer (weight matrix, bias) views into the flat vector."""
        if w.shape[0] != self.n_weights:
            raise ValueError(f"expected {self.n_weights} weights, got {w.shape[0]}")
        layers = []
        offset = 0
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            mat = w[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
            offset += fan_in * fan_out
            bias = w[offset : offset + fan_out]
            offset += fan_out
            layers.append((mat, bias))
        return layers

    def forward(self, w: np.ndarray, features: np.ndarray) -> np.ndarray:
        """Predictions of shape (N, 7)."""
        out, _ = self._forward_cached(w, features)
        return out

    def _forward_cached(self, w, features):
        layers = self.unpack(w)
        activations = [np.asarray(features, dtype=np.float64)]
        a = activations[0]
        for mat, bias in layers[:-1]:
            a = np.tanh(a @ mat + bias)
            activations.append(a)
        mat, bias = layers[-1]
        return a @ mat + bias, activations

    def _backward(self, w, activations, d_out):
        """Gradient of a scalar loss w.r.t. the flat weights, given d(loss)/d(output)."""
        layers = self.unpack(w)
        grads = [None] * len(layers)
        d = d_out
        for i in range(len(layers) - 1, -1, -1):
            mat, _ = layers[i]
            a_in = activations[i]
            grads[i] = (a_in.T @ d, d.sum(axis=0))
            if i > 0:
                d = (d @ mat.T) * (1.0 - activations[i] ** 2)
        flat = []
        for g_mat, g_bias in grads:
            flat.append(g_mat.ravel())
            flat.append(g_bias)
        return np.concatenate(flat)


def _normalize_rows(q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(q, axis=1)
    if np.any(norms == 0):
        raise ValueError("predicted quaternion has zero norm and cannot be normalised")
    return q / norms[:, None], norms


def pose_loss(
    pred_positions: np.ndarray,
    pred_quaternions: np.ndarray,
    gt_positions: np.ndarray,
    gt_quaternions: np.ndarray,
    s_p: float,
    s_q: float,
) -> float:
    """Uncertainty-weighted L1 pose loss over a batch.

    Predicted quaternions are length-normalised internally; ground-truth
    quaternions are assumed unit (canonical hemisphere).
    """
    pred_positions = np.asarray(pred_positions, dtype=np.float64)
    pred_quaternions = np.asarray(pred_quaternions, dtype=np.float64)
    if pred_positions.shape != gt_positions.shape or pred_positions.shape[1:] != (3,):
        raise ValueError("position arrays must share shape (N, 3)")
    if pred_quaternions.shape != gt_quaternions.shape or pred_quaternions.shape[1:] != (4,):
        raise ValueError("quaternion arrays must share shape (N, 4)")
    q_norm, _ = _normalize_rows(pred_quaternions)
    loss_p = np.abs(pred_positions - gt_positions).mean()
    loss_q = np.abs(q_norm - gt_quaternions).mean()
    return float(np.exp(-s_p) * loss_p + s_p + np.exp(-s_q) * loss_q + s_q)


def pose_loss_grad(
    x: np.ndarray,
    features: np.ndarray,
    gt_positions: np.ndarray,
    gt_quaternions: np.ndarray,
    model: TinyRegressor,
) -> tuple[float, np.ndarray]:
    """Loss value and its exact gradient w.r.t. the full parameter vector.

    ``x`` is [network weights, s_p, s_q]. The L1 subgradient uses sign(0) = 0;
    the quaternion normalisation is differentiated exactly.
    """
    x = as_param_vector(x)
    if x.shape[0] != model.n_weights + 2:
        raise ValueError(f"expected {model.n_weights + 2} parameters, got {x.shape[0]}")
    w, s_p, s_q = x[:-2], float(x[-2]), float(x[-1])
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    if n == 0:
        raise ValueError("empty batch")

    out, activations = model._forward_cached(w, features)
    pred_p, pred_q = out[:, :3], out[:, 3:]
    q_norm, norms = _normalize_rows(pred_q)

    res_p = pred_p - gt_positions
    res_q = q_norm - gt_quaternions
    loss_p = np.abs(res_p).mean()
    loss_q = np.abs(res_q).mean()
    w_p, w_q = np.exp(-s_p), np.exp(-s_q)
    loss = w_p * loss_p + s_p + w_q * loss_q + s_q

    d_pred_p = w_p * np.sign(res_p) / (3.0 * n)
    d_qnorm = w_q * np.sign(res_q) / (4.0 * n)
    # Through q / |q|: project out the radial component, then scale by 1/|q|.
    d_pred_q = (d_qnorm - (d_qnorm * q_norm).sum(axis=1, keepdims=True) * q_norm) / norms[:, None]
    d_out = np.hstack([d_pred_p, d_pred_q])

    grad_w = model._backward(w, activations, d_out)
    grad_s_p = 1.0 - w_p * loss_p
    grad_s_q = 1.0 - w_q * loss_q
    return float(loss), np.concatenate([grad_w, [grad_s_p, grad_s_q]])


class PoseTask:
    """Bundles a scene pair and a regressor into the harness problem interface."""

    def __init__(
        self,
        train: Scene,
        val: Scene,
        model: TinyRegressor | None = None,
        s_p_init: float = 0.0,
        s_q_init: float = -3.0,
    ):
        self.train = train
        self.val = val
        self.model = model if model is not None else TinyRegressor(n_features=train.n_features)
        if self.model.n_features != train.n_features:
            raise ValueError("model feature width does not match the scene")
        self.s_p_init = float(s_p_init)
        self.s_q_init = float(s_q_init)

    @property
    def n_params(self) -> int:
        return self.model.n_weights + 2

    @property
    def n_train(self) -> int:
        return len(self.train)

    def init_x(self, rng: np.random.Generator) -> np.ndarray:
        return np.concatenate([self.model.init_weights(rng), [self.s_p_init, self.s_q_init]])

    def _scene(self, split: str) -> Scene:
        if split == "train":
            return self.train
        if split == "val":
            return self.val
        raise ValueError(f"split must be 'train' or 'val', got {split!r}")

    def loss_and_grad(self, x: np.ndarray, idx=None, split: str = "train"):
        scene = self._scene(split)
        if idx is None:
            feats, gp, gq = scene.features, scene.positions, scene.quaternions
        else:
            feats, gp, gq = scene.features[idx], scene.positions[idx], scene.quaternions[idx]
        return pose_loss_grad(x, feats, gp, gq, self.model)

    def loss(self, x: np.ndarray, split: str = "val") -> float:
        scene = self._scene(split)
        out = self.model.forward(x[:-2], scene.features)
        return pose_loss(
            out[:, :3], out[:, 3:], scene.positions, scene.quaternions, float(x[-2]), float(x[-1])
        )

    def _predict_split(self, x, scene, features=None):
        feats = scene.features if features is None else features
        out = self.model.forward(x[:-2], feats)
        q_norm, _ = _normalize_rows(out[:, 3:])
        return out[:, :3], q_norm

    def errors(self, x: np.ndarray, split: str = "val", features=None):
        """Per-sample position and rotation errors of the current parameters."""
        scene = self._scene(split)
        pred_p, pred_q = self._predict_split(x, scene, features)
        pos = np.array(
            [metrics.position_error(pred_p[i], scene.positions[i]) for i in range(len(scene))]
        )
        rot = np.array(
            [metrics.rotation_error(pred_q[i], scene.quaternions[i]) for i in range(len(scene))]
        )
        return pos, rot


class PoseRegressor(BaseEstimator, RegressorMixin):
    """scikit-learn estimator wrapping the regressor plus pose-loss training.

    ``fit`` expects y of shape (n, 7): three position columns followed by a
    scalar-first quaternion, which is normalised and flipped to the canonical
    hemisphere before training. ``predict`` returns the same layout with unit
    quaternions.
    """

    def __init__(
        self,
        optimizer=None,
        hidden=(64, 64),
        n_iterations: int = 500,
        batch_size: int = 32,
        s_p_init: float = 0.0,
        s_q_init: float = -3.0,
        random_state: int = 0,
    ):
        self.optimizer = optimizer
        self.hidden = hidden
        self.n_iterations = n_iterations
        self.batch_size = batch_size
        self.s_p_init = s_p_init
        self.s_q_init = s_q_init
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True)
        if y.ndim != 2 or y.shape[1] != 7:
            raise ValueError("y must have shape (n_samples, 7): position then quaternion")
        if self.n_iterations < 1:
            raise ValueError(f"n_iterations must be positive, got {self.n_iterations}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")
        gt_p = y[:, :3]
        norms = np.linalg.norm(y[:, 3:], axis=1)
        if np.any(norms == 0):
            raise ValueError("ground-truth quaternions must be nonzero")
        gt_q = canonical_hemisphere(y[:, 3:] / norms[:, None])

        model = TinyRegressor(n_features=X.shape[1], hidden=self.hidden)
        optimizer = clone(self.optimizer) if self.optimizer is not None else OcpLs()
        rng = np.random.default_rng(self.random_state)
        x = np.concatenate([model.init_weights(rng), [self.s_p_init, self.s_q_init]])
        state = optimizer.init_state(x.shape[0])
        n = X.shape[0]
        batch = min(int(self.batch_size), n)
        history = []
        for _ in range(int(self.n_iterations)):
            idx = rng.integers(0, n, size=batch)
            loss, grad = pose_loss_grad(x, X[idx], gt_p[idx], gt_q[idx], model)
            history.append(loss)
            x, state = optimizer.step(state, x, grad)

        self.model_ = model
        self.params_ = x
        self.s_p_ = float(x[-2])
        self.s_q_ = float(x[-1])
        self.history_ = np.array(history)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        out = self.model_.forward(self.params_[:-2], X)
        q_norm, _ = _normalize_rows(out[:, 3:])
        return np.hstack([out[:, :3], q_norm])

"""Pose accuracy metrics: Euclidean position error and geodesic rotation error.

Rotation error treats q and -q as the same rotation: the angle between two
unit quaternions is 2 * arccos(|<q_hat, q>|), reported in degrees within
[0, 180]. Predicted quaternions are length-normalised before comparison, so
any positive rescaling of the prediction leaves the error unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ErrorSummary", "position_error", "rotation_error", "summarize"]


@dataclass(frozen=True)
class ErrorSummary:
    """Median and mean position (meters) and rotation (degrees) errors."""

    median_position: float
    mean_position: float
    median_rotation: float
    mean_rotation: float


def position_error(pred_position: np.ndarray, gt_position: np.ndarray) -> float:
    """Euclidean distance in meters."""
    pred = np.asarray(pred_position, dtype=np.float64)
    gt = np.asarray(gt_position, dtype=np.float64)
    if pred.shape != (3,) or gt.shape != (3,):
        raise ValueError("positions must be 3-vectors")
    return float(np.linalg.norm(pred - gt))


def rotation_error(pred_quaternion: np.ndarray, gt_quaternion: np.ndarray) -> float:
    """Geodesic angle in degrees between two rotations, in [0, 180].

    The prediction is normalised internally (zero norm is an error); the
    ground truth is assumed unit. The absolute dot product makes the result
    invariant to the sign of either quaternion.
    """
    pred = np.asarray(pred_quaternion, dtype=np.float64)
    gt = np.asarray(gt_quaternion, dtype=np.float64)
    if pred.shape != (4,) or gt.shape != (4,):
        raise ValueError("quaternions must be 4-vectors")
    norm = np.linalg.norm(pred)
    if norm == 0:
        raise ValueError("predicted quaternion has zero norm")
    dot = abs(float(pred @ gt) / norm)
    return float(np.degrees(2.0 * np.arccos(min(dot, 1.0))))


def summarize(position_errors, rotation_errors) -> ErrorSummary:
    """Median and mean of each error sequence; empty input is an error.

    Medians follow the midpoint convention: for an even count the two central
    order statistics are averaged.
    """
    pos = np.asarray(position_errors, dtype=np.float64)
    rot = np.asarray(rotation_errors, dtype=np.float64)
    if pos.size == 0 or rot.size == 0:
        raise ValueError("cannot summarise empty error sequences")
    return ErrorSummary(
        median_position=float(np.median(pos)),
        mean_position=float(np.mean(pos)),
        median_rotation=float(np.median(rot)),
        mean_rotation=float(np.mean(rot)),
    )

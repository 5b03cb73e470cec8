"""Sequence-level evaluation: center error, IoU, precision and success AUC."""

from __future__ import annotations

import numpy as np

from .errors import InputError, LengthMismatch

SUCCESS_THRESHOLDS = np.arange(21) / 20.0


def _as_array(boxes) -> np.ndarray:
    arr = np.array([b.as_tuple() if hasattr(b, "as_tuple") else tuple(b) for b in boxes], dtype=float)
    return arr.reshape(-1, 4)


def _pair(pred, gt):
    P, G = _as_array(pred), _as_array(gt)
    if len(P) != len(G):
        raise LengthMismatch(f"{len(P)} predicted boxes vs {len(G)} ground-truth boxes")
    if len(P) == 0:
        raise InputError("box lists must be non-empty")
    return P, G


def center_error(pred, gt) -> np.ndarray:
    """Per-frame Euclidean distance between box centers."""
    P, G = _pair(pred, gt)
    dc = (P[:, :2] + P[:, 2:] / 2.0) - (G[:, :2] + G[:, 2:] / 2.0)
    return np.hypot(dc[:, 0], dc[:, 1])


def iou(pred, gt) -> np.ndarray:
    """Per-frame intersection over union."""
    P, G = _pair(pred, gt)
    x1 = np.maximum(P[:, 0], G[:, 0])
    y1 = np.maximum(P[:, 1], G[:, 1])
    x2 = np.minimum(P[:, 0] + P[:, 2], G[:, 0] + G[:, 2])
    y2 = np.minimum(P[:, 1] + P[:, 3], G[:, 1] + G[:, 3])
    inter = np.clip(x2 - x1, 0, None) * np.clip(y2 - y1, 0, None)
    # extents as right - left so identical boxes give IoU of exactly 1
    area_p = ((P[:, 0] + P[:, 2]) - P[:, 0]) * ((P[:, 1] + P[:, 3]) - P[:, 1])
    area_g = ((G[:, 0] + G[:, 2]) - G[:, 0]) * ((G[:, 1] + G[:, 3]) - G[:, 1])
    union = area_p + area_g - inter
    return inter / union


def precision_metric(pred, gt, threshold: float = 20.0) -> float:
    """Fraction of frames whose center error is at most ``threshold``."""
    return float(np.mean(center_error(pred, gt) <= threshold))


def success_curve(pred, gt, thresholds=SUCCESS_THRESHOLDS) -> np.ndarray:
    ov = iou(pred, gt)
    return np.array([np.mean(ov >= t) for t in thresholds])


def success_auc(pred, gt) -> float:
    """Mean success rate over IoU thresholds 0, 0.05, ..., 1 (inclusive)."""
    return float(np.mean(success_curve(pred, gt)))


def precision_curve(pred, gt, thresholds=np.arange(51)) -> np.ndarray:
    err = center_error(pred, gt)
    return np.array([np.mean(err <= t) for t in thresholds])

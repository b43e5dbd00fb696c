"""Angular-error evaluation and binary-segmentation scoring."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import NormalMap, _as_f64, _readonly

__all__ = [
    "AngularErrorMap",
    "ConfusionCounts",
    "angular_error_map",
    "mean_angular_error",
    "median_angular_error",
    "max_angular_error",
    "confusion",
    "fscore",
    "iou",
]


class AngularErrorMap:
    """Per-pixel angular error in degrees over jointly valid pixels."""

    def __init__(self, values, valid, copy=True):
        values = _as_f64(values, copy)
        given = np.asarray(valid, dtype=bool)
        if values.shape != given.shape or values.ndim != 2:
            raise ValueError("values and valid must share one 2-d shape")
        mask = np.isfinite(values) & given
        self.values = _readonly(values)
        self.valid = _readonly(mask)

    @property
    def shape(self):
        return self.values.shape

    def valid_count(self) -> int:
        return int(self.valid.sum())


def angular_error_map(est: NormalMap, gt: NormalMap, fold: bool = False) -> AngularErrorMap:
    """arccos of the normalized dot product, in degrees, per joint pixel.

    Direction-sensitive by default: antipodal normals score 180.  ``fold``
    compares axes instead (|dot|, errors in [0, 90]) for data that does not
    follow this package's orientation convention.
    """
    if est.shape != gt.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {gt.shape}")
    valid = est.valid & gt.valid
    dot = np.sum(est.values * gt.values, axis=-1)
    na = np.linalg.norm(est.values, axis=-1)
    nb = np.linalg.norm(gt.values, axis=-1)
    denom = np.where(valid, na * nb, 1.0)
    cos = np.clip(np.where(valid, dot, 1.0) / denom, -1.0, 1.0)
    if fold:
        cos = np.abs(cos)
    return AngularErrorMap(np.degrees(np.arccos(cos)), valid, copy=False)


def mean_angular_error(errors: AngularErrorMap) -> float:
    """Arithmetic mean over valid pixels (compensated summation)."""
    m = errors.valid_count()
    if m == 0:
        raise ValueError("no valid pixels to average")
    return math.fsum(errors.values[errors.valid]) / m


def median_angular_error(errors: AngularErrorMap) -> float:
    if errors.valid_count() == 0:
        raise ValueError("no valid pixels")
    return float(np.median(errors.values[errors.valid]))


def max_angular_error(errors: AngularErrorMap) -> float:
    if errors.valid_count() == 0:
        raise ValueError("no valid pixels")
    return float(np.max(errors.values[errors.valid]))


@dataclass(frozen=True)
class ConfusionCounts:
    """Pixel counts of a binary prediction against binary ground truth."""

    n_tp: int
    n_fp: int
    n_fn: int
    n_tn: int

    def __post_init__(self):
        if min(self.n_tp, self.n_fp, self.n_fn, self.n_tn) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def total(self) -> int:
        return self.n_tp + self.n_fp + self.n_fn + self.n_tn


def confusion(pred, gt, eval_mask=None) -> ConfusionCounts:
    """Tally tp/fp/fn/tn over the evaluation-valid pixels."""
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    if eval_mask is None:
        eval_mask = np.ones(pred.shape, dtype=bool)
    else:
        eval_mask = np.asarray(eval_mask, dtype=bool)
        if eval_mask.shape != pred.shape:
            raise ValueError("eval mask shape mismatch")
    p = pred[eval_mask]
    g = gt[eval_mask]
    return ConfusionCounts(
        n_tp=int(np.sum(p & g)),
        n_fp=int(np.sum(p & ~g)),
        n_fn=int(np.sum(~p & g)),
        n_tn=int(np.sum(~p & ~g)),
    )


def _check_defined(c: ConfusionCounts):
    if c.n_tp + c.n_fp + c.n_fn == 0:
        raise ValueError("score undefined: no positive pixels in either mask")


def fscore(c: ConfusionCounts) -> float:
    """F-score in percent: 2 tp / (2 tp + fp + fn) * 100.

    Equals 2*IoU/(1 + IoU) exactly; zero when there are no true positives
    but positives exist somewhere.
    """
    _check_defined(c)
    return 200.0 * c.n_tp / (2 * c.n_tp + c.n_fp + c.n_fn)


def iou(c: ConfusionCounts) -> float:
    """Intersection over union in percent: tp / (tp + fp + fn) * 100."""
    _check_defined(c)
    return 100.0 * c.n_tp / (c.n_tp + c.n_fp + c.n_fn)

"""Pairwise box similarity: IoU, GIoU, DIoU, CIoU and the Normalized Wasserstein Distance.

All metrics share one broadcasting numpy core, so the scalar functions
(``iou(a, b)``) and the batch matrix (:func:`pairwise_similarity`) return
bit-identical values for the same pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .geometry import Gaussian2D, as_box, check_boxes

DEFAULT_C = 12.8
METRIC_NAMES = ("iou", "giou", "diou", "ciou", "nwd")

_CIOU_K = 4 / math.pi**2


class InvalidConstantError(ValueError):
    """NWD normalisation constant must be a positive real."""


def _check_c(c: float) -> float:
    if not (isinstance(c, (int, float, np.floating, np.integer)) and math.isfinite(c) and c > 0):
        raise InvalidConstantError(f"NWD constant C must be > 0, got {c!r}")
    return float(c)


@dataclass(frozen=True)
class MetricKind:
    """Selects one similarity metric; ``c`` is only used by NWD."""

    name: str = "iou"
    c: float = DEFAULT_C

    def __post_init__(self):
        name = self.name.lower()
        if name not in METRIC_NAMES:
            raise ValueError(f"unknown metric {self.name!r}, expected one of {METRIC_NAMES}")
        object.__setattr__(self, "name", name)
        if name == "nwd":
            object.__setattr__(self, "c", _check_c(self.c))

    @classmethod
    def nwd(cls, c: float = DEFAULT_C) -> "MetricKind":
        return cls("nwd", c)

    @property
    def lower_bound(self) -> float:
        if self.name in ("iou", "nwd"):
            return 0.0
        # alpha * v = v^2 / (1 - iou + v) <= 1/2 once iou = 0
        return -1.5 if self.name == "ciou" else -1.0

    def __str__(self):
        return f"nwd(C={self.c:g})" if self.name == "nwd" else self.name


IOU = MetricKind("iou")
GIOU = MetricKind("giou")
DIOU = MetricKind("diou")
CIOU = MetricKind("ciou")


def _as_kind(kind) -> MetricKind:
    if isinstance(kind, MetricKind):
        return kind
    return MetricKind(str(kind))


def _overlap_terms(a: np.ndarray, b: np.ndarray):
    ahw, ahh = a[..., 2] / 2, a[..., 3] / 2
    bhw, bhh = b[..., 2] / 2, b[..., 3] / 2
    ax1, ax2 = a[..., 0] - ahw, a[..., 0] + ahw
    ay1, ay2 = a[..., 1] - ahh, a[..., 1] + ahh
    bx1, bx2 = b[..., 0] - bhw, b[..., 0] + bhw
    by1, by2 = b[..., 1] - bhh, b[..., 1] + bhh

    iw = np.clip(np.minimum(ax2, bx2) - np.maximum(ax1, bx1), 0, None)
    ih = np.clip(np.minimum(ay2, by2) - np.maximum(ay1, by1), 0, None)
    inter = iw * ih
    # areas from corner extents so that identical boxes give inter == union exactly
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    ew = np.maximum(ax2, bx2) - np.minimum(ax1, bx1)
    eh = np.maximum(ay2, by2) - np.minimum(ay1, by1)
    return inter, union, ew, eh


def _iou(a, b):
    inter, union, _, _ = _overlap_terms(a, b)
    return inter / union


def _giou(a, b):
    inter, union, ew, eh = _overlap_terms(a, b)
    enclose = ew * eh
    return inter / union - (enclose - union) / enclose


def _diou(a, b):
    inter, union, ew, eh = _overlap_terms(a, b)
    rho2 = (a[..., 0] - b[..., 0]) ** 2 + (a[..., 1] - b[..., 1]) ** 2
    return inter / union - rho2 / (ew * ew + eh * eh)


def _ciou(a, b):
    inter, union, ew, eh = _overlap_terms(a, b)
    iou = inter / union
    rho2 = (a[..., 0] - b[..., 0]) ** 2 + (a[..., 1] - b[..., 1]) ** 2
    v = _CIOU_K * (np.arctan(a[..., 2] / a[..., 3]) - np.arctan(b[..., 2] / b[..., 3])) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = np.where(v > 0, v / ((1 - iou) + v), 0.0)
    return iou - rho2 / (ew * ew + eh * eh) - alpha * v


def _w2_sq(a, b):
    return (
        (a[..., 0] - b[..., 0]) ** 2
        + (a[..., 1] - b[..., 1]) ** 2
        + (a[..., 2] - b[..., 2]) ** 2 / 4
        + (a[..., 3] - b[..., 3]) ** 2 / 4
    )


def _nwd(a, b, c):
    return np.exp(-np.sqrt(_w2_sq(a, b)) / c)


def _dispatch(kind: MetricKind, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if kind.name == "iou":
        return _iou(a, b)
    if kind.name == "giou":
        return _giou(a, b)
    if kind.name == "diou":
        return _diou(a, b)
    if kind.name == "ciou":
        return _ciou(a, b)
    return _nwd(a, b, kind.c)


def _pair(a, b):
    return np.asarray(as_box(a), dtype=np.float64), np.asarray(as_box(b), dtype=np.float64)


def iou(a, b) -> float:
    """Intersection over union; 0 for disjoint boxes."""
    return float(_iou(*_pair(a, b)))


def giou(a, b) -> float:
    """IoU minus the fraction of the smallest enclosing box not covered by the union."""
    return float(_giou(*_pair(a, b)))


def diou(a, b) -> float:
    """IoU minus squared center distance over squared enclosing-box diagonal."""
    return float(_diou(*_pair(a, b)))


def ciou(a, b) -> float:
    """DIoU with the aspect-ratio consistency penalty ``alpha * v``.

    ``alpha = v / ((1 - IoU) + v)``, taken as 0 when ``v == 0``.
    """
    return float(_ciou(*_pair(a, b)))


def wasserstein_sq_general(g1: Gaussian2D, g2: Gaussian2D) -> float:
    """Squared 2-Wasserstein distance from the general Gaussian closed form.

    ``|m1 - m2|^2 + Tr(S1 + S2 - 2 (S2^1/2 S1 S2^1/2)^1/2)``; square roots are
    taken on the diagonal, which is exact for axis-aligned covariances.
    """
    mean_term = (g1.mean[0] - g2.mean[0]) ** 2 + (g1.mean[1] - g2.mean[1]) ** 2
    trace = 0.0
    for s1, s2 in zip(g1.cov_diag, g2.cov_diag):
        root2 = math.sqrt(s2)
        trace += s1 + s2 - 2 * math.sqrt(root2 * s1 * root2)
    return mean_term + trace


def wasserstein_sq_frobenius(g1: Gaussian2D, g2: Gaussian2D) -> float:
    """``|m1 - m2|^2 + ||S1^1/2 - S2^1/2||_F^2`` for commuting (diagonal) covariances."""
    mean_term = (g1.mean[0] - g2.mean[0]) ** 2 + (g1.mean[1] - g2.mean[1]) ** 2
    (s1x, s1y), (s2x, s2y) = g1.std, g2.std
    return mean_term + (s1x - s2x) ** 2 + (s1y - s2y) ** 2


def wasserstein_sq_boxes(a, b) -> float:
    """Squared L2 distance between ``[cx, cy, w/2, h/2]`` vectors of two boxes."""
    return float(_w2_sq(*_pair(a, b)))


def nwd(a, b, c: float = DEFAULT_C) -> float:
    """Normalized Wasserstein Distance ``exp(-sqrt(W2^2) / C)``, in (0, 1]."""
    c = _check_c(c)
    return float(_nwd(*_pair(a, b), c))


def similarity(kind, a, b) -> float:
    kind = _as_kind(kind)
    return float(_dispatch(kind, *_pair(a, b)))


def pairwise_similarity(kind, gts, candidates) -> np.ndarray:
    """Dense similarity matrix, rows indexing ``gts`` and columns ``candidates``."""
    kind = _as_kind(kind)
    g = check_boxes(gts, "gts")
    c = check_boxes(candidates, "candidates")
    if len(g) == 0 or len(c) == 0:
        return np.zeros((len(g), len(c)), dtype=np.float64)
    return _dispatch(kind, g[:, None, :], c[None, :, :])


class PairwiseSimilarity(TransformerMixin, BaseEstimator):
    """Map boxes to their similarities against a fitted set of reference boxes.

    ``fit`` stores the reference boxes (e.g. ground truths); ``transform``
    returns an ``(n_samples, n_reference)`` matrix, so each input box becomes a
    feature vector of similarities.

    Parameters
    ----------
    metric : {"iou", "giou", "diou", "ciou", "nwd"}
    c : float
        NWD normalisation constant in pixels.
    """

    def __init__(self, metric: str = "nwd", c: float = DEFAULT_C):
        self.metric = metric
        self.c = c

    def fit(self, X, y=None):
        self.kind_ = MetricKind(self.metric, self.c)
        self.reference_boxes_ = check_boxes(X, "X")
        self.n_features_in_ = 4
        return self

    def transform(self, X):
        check_is_fitted(self, "reference_boxes_")
        return pairwise_similarity(self.kind_, self.reference_boxes_, X).T

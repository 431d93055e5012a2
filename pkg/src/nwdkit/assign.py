"""Max-similarity positive/negative anchor labelling with a pluggable metric.

An anchor is positive when (1) it is some gt's best-matching anchor and that
similarity is strictly above ``neg_threshold``, or (2) its similarity to some
gt is strictly above ``pos_threshold``. Otherwise it is negative when its
similarity to every gt is below ``neg_threshold``, and ignored if not.
Positives are assigned to their most similar gt. With the same thresholds for
IoU and NWD, the NWD variant is a drop-in replacement.

Ties: a gt's best anchor is the lowest-index one; an anchor's gt is the
lowest-index one.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .geometry import check_boxes
from .metrics import DEFAULT_C, IOU, MetricKind, _as_kind, pairwise_similarity

NEGATIVE = -1
IGNORE = -2


class UndefinedStatisticError(ValueError):
    pass


@dataclass(frozen=True)
class AssignerConfig:
    metric: MetricKind = field(default=IOU)
    pos_threshold: float = 0.7
    neg_threshold: float = 0.3
    image_size: tuple[int, int] | None = None
    drop_outside: bool = False

    def __post_init__(self):
        object.__setattr__(self, "metric", _as_kind(self.metric))
        if not 0.0 <= self.neg_threshold <= self.pos_threshold:
            raise ValueError(
                f"need 0 <= neg_threshold <= pos_threshold, got "
                f"({self.neg_threshold}, {self.pos_threshold})"
            )
        if self.drop_outside and self.image_size is None:
            raise ValueError("drop_outside needs image_size")


@dataclass
class AssignmentResult:
    """Per-anchor labels.

    ``gt_index[i]`` is the assigned gt for positives, :data:`NEGATIVE` or
    :data:`IGNORE` otherwise.
    """

    gt_index: np.ndarray
    per_gt_positive_count: np.ndarray
    max_similarity: np.ndarray

    @property
    def positive(self) -> np.ndarray:
        return self.gt_index >= 0

    @property
    def negative(self) -> np.ndarray:
        return self.gt_index == NEGATIVE

    @property
    def ignored(self) -> np.ndarray:
        return self.gt_index == IGNORE

    @property
    def num_positive(self) -> int:
        return int(self.positive.sum())

    def labels(self) -> list:
        """Human-readable labels: ``("pos", gt)``, ``"neg"`` or ``"ignore"``."""
        return [
            ("pos", int(g)) if g >= 0 else ("neg" if g == NEGATIVE else "ignore")
            for g in self.gt_index
        ]


def _outside(anchors: np.ndarray, image_size) -> np.ndarray:
    w, h = image_size
    half = anchors[:, 2:] / 2
    x1, y1 = (anchors[:, :2] - half).T
    x2, y2 = (anchors[:, :2] + half).T
    return (x2 <= 0) | (y2 <= 0) | (x1 >= w) | (y1 >= h)


def assign_from_similarity(sim: np.ndarray, pos_threshold: float, neg_threshold: float) -> AssignmentResult:
    """Label anchors from a ``(n_gts, n_anchors)`` similarity matrix."""
    n_gts, n_anchors = sim.shape
    if n_gts == 0:
        return AssignmentResult(
            np.full(n_anchors, NEGATIVE, dtype=np.int64),
            np.zeros(0, dtype=np.int64),
            np.full(n_anchors, -np.inf),
        )
    # argmax returns the first maximum, giving the lowest-index tie-break
    best_gt = sim.argmax(axis=0)
    max_sim = sim[best_gt, np.arange(n_anchors)]

    positive = max_sim > pos_threshold
    best_anchor = sim.argmax(axis=1)
    best_val = sim[np.arange(n_gts), best_anchor]
    positive[best_anchor[best_val > neg_threshold]] = True

    gt_index = np.full(n_anchors, IGNORE, dtype=np.int64)
    gt_index[max_sim < neg_threshold] = NEGATIVE
    gt_index[positive] = best_gt[positive]
    counts = np.bincount(best_gt[positive], minlength=n_gts).astype(np.int64)
    return AssignmentResult(gt_index, counts, max_sim)


def assign(anchors, gts, cfg: AssignerConfig = AssignerConfig()) -> AssignmentResult:
    anchors = check_boxes(anchors, "anchors")
    gts = check_boxes(gts, "gts")
    if len(anchors) == 0:
        raise ValueError("anchor list is empty")
    sim = pairwise_similarity(cfg.metric, gts, anchors)
    if cfg.drop_outside:
        # outside anchors never match; they are labelled ignore below
        outside = _outside(anchors, cfg.image_size)
        sim[:, outside] = -np.inf
    result = assign_from_similarity(sim, cfg.pos_threshold, cfg.neg_threshold)
    if cfg.drop_outside:
        result.gt_index[outside] = IGNORE
    return result


def avg_positives_per_gt(anchors, gts, cfg: AssignerConfig = AssignerConfig()) -> float:
    gts = check_boxes(gts, "gts")
    if len(gts) == 0:
        raise UndefinedStatisticError("average positives per gt is undefined without gts")
    return float(assign(anchors, gts, cfg).per_gt_positive_count.mean())


def label_flip_count(anchors, gts, cfg: AssignerConfig, deviation: tuple[int, int]) -> int:
    """Anchors whose label (including assigned gt) changes when all gts shift by ``deviation``."""
    gts = check_boxes(gts, "gts")
    shifted = gts.copy()
    shifted[:, 0] += deviation[0]
    shifted[:, 1] += deviation[1]
    before = assign(anchors, gts, cfg).gt_index
    after = assign(anchors, shifted, cfg).gt_index
    return int((before != after).sum())


class MaxSimilarityAssigner(BaseEstimator):
    """Estimator-style assigner.

    ``fit(anchors, gts)`` labels the anchors and stores ``labels_`` (gt index,
    -1 negative, -2 ignore) and ``per_gt_positive_count_``.

    Parameters
    ----------
    metric : {"iou", "giou", "diou", "ciou", "nwd"}
    c : float
    pos_threshold, neg_threshold : float
    """

    def __init__(self, metric="iou", c=DEFAULT_C, pos_threshold=0.7, neg_threshold=0.3):
        self.metric = metric
        self.c = c
        self.pos_threshold = pos_threshold
        self.neg_threshold = neg_threshold

    def _config(self) -> AssignerConfig:
        return AssignerConfig(MetricKind(self.metric, self.c), self.pos_threshold, self.neg_threshold)

    def fit(self, anchors, gts):
        self.result_ = assign(anchors, gts, self._config())
        self.labels_ = self.result_.gt_index
        self.per_gt_positive_count_ = self.result_.per_gt_positive_count
        return self

    def fit_predict(self, anchors, gts):
        return self.fit(anchors, gts).labels_

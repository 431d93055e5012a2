"""Greedy class-wise non-maximum suppression with a pluggable similarity metric.

Detections scoring below ``score_floor`` are dropped first. The rest are
visited in descending score (ties: lower input index first); each kept
detection suppresses every same-category detection whose similarity to it is
strictly greater than the threshold.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .geometry import BoundingBox, as_box, check_boxes
from .metrics import DEFAULT_C, IOU, MetricKind, _as_kind, pairwise_similarity, similarity


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    score: float
    category: int = 0

    def __post_init__(self):
        object.__setattr__(self, "box", as_box(self.box))
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"detection score must be in [0, 1], got {self.score}")


@dataclass(frozen=True)
class NmsConfig:
    metric: MetricKind = field(default=IOU)
    threshold: float = 0.5
    score_floor: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "metric", _as_kind(self.metric))
        if not self.metric.lower_bound <= self.threshold <= 1.0:
            raise ValueError(f"threshold {self.threshold} outside the range of {self.metric}")
        if not 0.0 <= self.score_floor <= 1.0:
            raise ValueError(f"score_floor must be in [0, 1], got {self.score_floor}")


def nms_keep(boxes, scores, categories, cfg: NmsConfig) -> np.ndarray:
    """Indices of kept boxes, ordered by descending score then index."""
    boxes = check_boxes(boxes)
    scores = np.asarray(scores, dtype=np.float64)
    categories = np.asarray(categories)
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")

    candidates = np.flatnonzero(scores >= cfg.score_floor)
    order = candidates[np.argsort(-scores[candidates], kind="stable")]
    keep = np.zeros(len(boxes), dtype=bool)
    for cat in np.unique(categories[order]):
        idx = order[categories[order] == cat]
        sim = pairwise_similarity(cfg.metric, boxes[idx], boxes[idx])
        alive = np.ones(len(idx), dtype=bool)
        for i in range(len(idx)):
            if not alive[i]:
                continue
            keep[idx[i]] = True
            alive[i + 1 :] &= ~(sim[i, i + 1 :] > cfg.threshold)
            if not alive[i + 1 :].any():
                break
    return order[keep[order]]


def nms(dets: list[Detection], cfg: NmsConfig = NmsConfig()) -> list[Detection]:
    if not dets:
        return []
    keep = nms_keep(
        [d.box for d in dets],
        [d.score for d in dets],
        [d.category for d in dets],
        cfg,
    )
    return [dets[i] for i in keep]


def nms_reference(dets: list[Detection], cfg: NmsConfig = NmsConfig()) -> list[Detection]:
    """Quadratic pure-Python NMS; same contract as :func:`nms`, for cross-checking."""
    remaining = [(i, d) for i, d in enumerate(dets) if d.score >= cfg.score_floor]
    remaining.sort(key=lambda item: (-item[1].score, item[0]))
    kept = []
    while remaining:
        _, best = remaining.pop(0)
        kept.append(best)
        survivors = []
        for i, d in remaining:
            if d.category == best.category and similarity(cfg.metric, best.box, d.box) > cfg.threshold:
                continue
            survivors.append((i, d))
        remaining = survivors
    return kept


class GreedyNMS(BaseEstimator):
    """Estimator-style wrapper around :func:`nms_keep`.

    Parameters
    ----------
    metric : {"iou", "giou", "diou", "ciou", "nwd"}
    c : float
        NWD constant, pixels.
    threshold : float
        Suppression threshold; similarity strictly above it suppresses.
    score_floor : float
        Detections scoring below this are discarded before suppression.
    """

    def __init__(self, metric="iou", c=DEFAULT_C, threshold=0.5, score_floor=0.05):
        self.metric = metric
        self.c = c
        self.threshold = threshold
        self.score_floor = score_floor

    def _config(self) -> NmsConfig:
        return NmsConfig(MetricKind(self.metric, self.c), self.threshold, self.score_floor)

    def keep_indices(self, boxes, scores, categories=None) -> np.ndarray:
        boxes = check_boxes(boxes)
        if categories is None:
            categories = np.zeros(len(boxes), dtype=int)
        return nms_keep(boxes, scores, categories, self._config())

    def filter(self, dets: list[Detection]) -> list[Detection]:
        return nms(dets, self._config())

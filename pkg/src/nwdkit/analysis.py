"""Deviation curves, assignment statistics and finite-difference gradient checks."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .anchors import AnchorGridConfig, generate_anchors
from .annotations import AnnotatedImage
from .assign import AssignerConfig, UndefinedStatisticError, assign
from .geometry import BoundingBox
from .losses import loss_value_and_grad
from .metrics import DEFAULT_C, MetricKind, similarity
from .synth import SplitMix64


@dataclass(frozen=True)
class CurveSpec:
    metric: MetricKind = field(default_factory=MetricKind)
    gt_size: int = 6
    deviation_axis: str = "diagonal"
    max_deviation: int = 10
    b_size_mode: str = "equal"

    def __post_init__(self):
        if self.gt_size <= 0:
            raise ValueError("gt_size must be positive")
        if self.max_deviation < 1:
            raise ValueError("max_deviation must be >= 1")
        if self.deviation_axis not in ("diagonal", "horizontal"):
            raise ValueError(f"deviation_axis must be 'diagonal' or 'horizontal', got {self.deviation_axis!r}")
        if self.b_size_mode not in ("equal", "half"):
            raise ValueError(f"b_size_mode must be 'equal' or 'half', got {self.b_size_mode!r}")

    @property
    def b_size(self) -> float:
        return self.gt_size if self.b_size_mode == "equal" else self.gt_size / 2


def curve(spec: CurveSpec) -> list[tuple[int, float]]:
    """Metric value between box A and a copy B shifted by 0..max_deviation pixels.

    Diagonal deviation ``d`` means the center offset ``(d, d)``.
    """
    s = spec.gt_size
    a = BoundingBox(s / 2, s / 2, s, s)
    points = []
    for d in range(spec.max_deviation + 1):
        dy = d if spec.deviation_axis == "diagonal" else 0
        b = BoundingBox(a.cx + d, a.cy + dy, spec.b_size, spec.b_size)
        points.append((d, similarity(spec.metric, a, b)))
    return points


def curve_rows(kind: MetricKind, sizes: Sequence[int], axis: str, max_deviation: int, b_size_mode: str) -> list[dict]:
    rows = []
    for size in sizes:
        spec = CurveSpec(kind, size, axis, max_deviation, b_size_mode)
        for d, value in curve(spec):
            rows.append(
                {
                    "metric": str(kind),
                    "gt_size_px": size,
                    "b_size_px": float(spec.b_size),
                    "deviation_px": d,
                    "value": value,
                }
            )
    return rows


CURVE_COLUMNS = ("metric", "gt_size_px", "b_size_px", "deviation_px", "value")


def _image_counts(image: AnnotatedImage, anchor_cfg: AnchorGridConfig, cfg: AssignerConfig) -> dict:
    anchors = generate_anchors(image.width, image.height, anchor_cfg)
    result = assign(anchors, image.boxes, cfg)
    counts = result.per_gt_positive_count
    return {
        "image_id": image.image_id,
        "gts": len(counts),
        "gt_positive_sum": int(counts.sum()),
        "zero_positive_gts": int((counts == 0).sum()),
        "positives": result.num_positive,
        "negatives": int(result.negative.sum()),
        "ignores": int(result.ignored.sum()),
    }


def assign_stats(
    images: Sequence[AnnotatedImage],
    anchor_cfg: AnchorGridConfig,
    kinds: Sequence[MetricKind],
    pos_threshold: float = 0.7,
    neg_threshold: float = 0.3,
    jobs: int = 1,
    per_image: bool = False,
) -> list[dict]:
    """One aggregate row per metric (plus per-image rows if requested).

    Images are processed on ``jobs`` threads; results are reduced in image
    order so the output does not depend on scheduling.
    """
    if sum(len(img.gts) for img in images) == 0:
        raise UndefinedStatisticError("dataset has no ground-truth boxes; positives per gt is undefined")
    rows = []
    for kind in kinds:
        cfg = AssignerConfig(kind, pos_threshold, neg_threshold)
        work = lambda img: _image_counts(img, anchor_cfg, cfg)  # noqa: E731
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                per = list(pool.map(work, images))
        else:
            per = [work(img) for img in images]

        if per_image:
            for p in per:
                rows.append(_stats_row(kind, str(p["image_id"]), 1, p))
        total = {k: sum(p[k] for p in per) for k in ("gts", "gt_positive_sum", "zero_positive_gts", "positives", "negatives", "ignores")}
        rows.append(_stats_row(kind, "all", len(images), total))
    return rows


def _stats_row(kind: MetricKind, scope: str, n_images: int, c: dict) -> dict:
    n = c["gts"]
    return {
        "metric": str(kind),
        "scope": scope,
        "images": n_images,
        "gts": n,
        "avg_positives_per_gt": c["gt_positive_sum"] / n if n else float("nan"),
        "zero_positive_fraction": c["zero_positive_gts"] / n if n else float("nan"),
        "positives": c["positives"],
        "negatives": c["negatives"],
        "ignores": c["ignores"],
    }


STATS_COLUMNS = (
    "metric",
    "scope",
    "images",
    "gts",
    "avg_positives_per_gt",
    "zero_positive_fraction",
    "positives",
    "negatives",
    "ignores",
)


# --- gradient checking -------------------------------------------------------

FD_STEP = 1e-6
GRAD_RTOL = 1e-5
# kinks of min/max and the NWD minimum are kept at least this far from the sample
_KINK_MARGIN = 1e-3


def central_difference(f: Callable[[np.ndarray], float], x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    grad = np.zeros_like(x, dtype=np.float64)
    for i in range(len(x)):
        hi, lo = x.copy(), x.copy()
        hi[i] += step
        lo[i] -= step
        grad[i] = (f(hi) - f(lo)) / (2 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """``|a - n| / max(|a|, |n|)`` in the Euclidean norm; 0 when both vanish."""
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def _near_kink(p: BoundingBox, g: BoundingBox) -> bool:
    pc, gc = p.to_corners(), g.to_corners()
    for axis in (0, 1):
        pe = (pc[axis], pc[axis + 2])
        ge = (gc[axis], gc[axis + 2])
        if any(abs(a - b) < _KINK_MARGIN for a in pe for b in ge):
            return True
    w2 = (p.cx - g.cx) ** 2 + (p.cy - g.cy) ** 2 + (p.w - g.w) ** 2 / 4 + (p.h - g.h) ** 2 / 4
    return math.sqrt(w2) < _KINK_MARGIN


def random_pair(rng: SplitMix64) -> tuple[BoundingBox, BoundingBox]:
    """A gt and a jittered prediction, mostly overlapping; sizes 2-32 px."""
    gt = BoundingBox(rng.uniform(0, 64), rng.uniform(0, 64), rng.uniform(2, 32), rng.uniform(2, 32))
    pred = BoundingBox(
        gt.cx + gt.w * rng.uniform(-0.8, 0.8),
        gt.cy + gt.h * rng.uniform(-0.8, 0.8),
        gt.w * rng.uniform(0.5, 2.0),
        gt.h * rng.uniform(0.5, 2.0),
    )
    return pred, gt


def disjoint_pair(rng: SplitMix64) -> tuple[BoundingBox, BoundingBox]:
    """Prediction separated from the gt by a gap of 1-8 px along x and/or y."""
    gt = BoundingBox(rng.uniform(0, 64), rng.uniform(0, 64), rng.uniform(2, 16), rng.uniform(2, 16))
    w, h = rng.uniform(2, 16), rng.uniform(2, 16)
    gap = rng.uniform(1, 8)
    sx, sy = rng.choice_sign(), rng.choice_sign()
    cx = gt.cx + sx * ((gt.w + w) / 2 + gap)
    cy = gt.cy + sy * rng.uniform(0, (gt.h + h) / 2 + gap)
    return BoundingBox(cx, cy, w, h), gt


def containment_pair(rng: SplitMix64) -> tuple[BoundingBox, BoundingBox]:
    """Prediction strictly inside the gt (or the gt inside the prediction)."""
    outer = BoundingBox(rng.uniform(0, 64), rng.uniform(0, 64), rng.uniform(8, 32), rng.uniform(8, 32))
    w, h = outer.w * rng.uniform(0.2, 0.6), outer.h * rng.uniform(0.2, 0.6)
    inner = BoundingBox(
        outer.cx + (outer.w - w) / 2 * rng.uniform(-0.8, 0.8),
        outer.cy + (outer.h - h) / 2 * rng.uniform(-0.8, 0.8),
        w,
        h,
    )
    if rng.next_u64() >> 63:
        return inner, outer
    return outer, inner


PAIR_SAMPLERS = {"random": random_pair, "disjoint": disjoint_pair, "containment": containment_pair}


def sample_pairs(kind: str, n: int, seed: int) -> list[tuple[BoundingBox, BoundingBox]]:
    rng = SplitMix64(seed)
    sampler = PAIR_SAMPLERS[kind]
    pairs = []
    while len(pairs) < n:
        p, g = sampler(rng)
        if not _near_kink(p, g):
            pairs.append((p, g))
    return pairs


def grad_check(
    loss: str,
    trials: int = 1000,
    seed: int = 0,
    pairs: str = "random",
    c: float = DEFAULT_C,
    step: float = FD_STEP,
    rtol: float = GRAD_RTOL,
) -> dict:
    """Compare analytic loss gradients with central differences on sampled pairs."""

    def value_at(x, gt):
        return loss_value_and_grad(loss, BoundingBox(*x), gt, c).value

    max_err = 0.0
    failures = 0
    zero_pos = 0
    for pred, gt in sample_pairs(pairs, trials, seed):
        analytic = loss_value_and_grad(loss, pred, gt, c).grad
        numeric = central_difference(lambda x: value_at(x, gt), np.asarray(pred), step)
        err = relative_error(analytic, numeric)
        max_err = max(max_err, err)
        if not err < rtol:
            failures += 1
        if analytic[0] == 0 and analytic[1] == 0:
            zero_pos += 1
    return {
        "loss": loss,
        "pairs": pairs,
        "trials": trials,
        "seed": seed,
        "max_rel_error": max_err,
        "failures": failures,
        "zero_position_grad": zero_pos,
        "status": "pass" if failures == 0 else "fail",
    }


GRAD_COLUMNS = ("loss", "pairs", "trials", "seed", "max_rel_error", "failures", "zero_position_grad", "status")

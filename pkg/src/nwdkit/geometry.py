"""Box representations and the box -> 2D Gaussian model.

Boxes live in center-size form ``(cx, cy, w, h)``. Corner form
``(x1, y1, x2, y2)`` and COCO's corner-origin ``[x, y, w, h]`` only appear
at conversion boundaries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from sklearn.utils import check_array


class InvalidBoxError(ValueError):
    """Raised for boxes with nonpositive or non-finite width/height."""


class SingularCovarianceError(ValueError):
    pass


@dataclass(frozen=True)
class BoundingBox:
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        vals = (self.cx, self.cy, self.w, self.h)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidBoxError(f"non-finite box {vals}")
        if self.w <= 0 or self.h <= 0:
            raise InvalidBoxError(f"box needs w > 0 and h > 0, got w={self.w}, h={self.h}")
        # normalise ints/np scalars so equality and hashing are value-based
        for name, v in zip(("cx", "cy", "w", "h"), vals):
            object.__setattr__(self, name, float(v))

    @classmethod
    def from_corners(cls, x1: float, y1: float, x2: float, y2: float) -> "BoundingBox":
        return cls((x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1)

    @classmethod
    def from_xywh(cls, x: float, y: float, w: float, h: float) -> "BoundingBox":
        """From COCO's corner-origin ``[x, y, w, h]``."""
        return cls(x + w / 2, y + h / 2, w, h)

    def to_corners(self) -> tuple[float, float, float, float]:
        return (
            self.cx - self.w / 2,
            self.cy - self.h / 2,
            self.cx + self.w / 2,
            self.cy + self.h / 2,
        )

    def to_xywh(self) -> tuple[float, float, float, float]:
        return (self.cx - self.w / 2, self.cy - self.h / 2, self.w, self.h)

    def translate(self, dx: float, dy: float) -> "BoundingBox":
        return BoundingBox(self.cx + dx, self.cy + dy, self.w, self.h)

    @property
    def area(self) -> float:
        return self.w * self.h

    def __array__(self, dtype=None, copy=None):
        return np.array([self.cx, self.cy, self.w, self.h], dtype=dtype or np.float64)

    def __iter__(self):
        return iter((self.cx, self.cy, self.w, self.h))


def as_box(value) -> BoundingBox:
    if isinstance(value, BoundingBox):
        return value
    cx, cy, w, h = value
    return BoundingBox(cx, cy, w, h)


def check_boxes(boxes, name: str = "boxes") -> np.ndarray:
    """Validate a batch of center-size boxes and return an ``(n, 4)`` float array.

    Accepts an array-like of shape ``(n, 4)`` or a sequence of
    :class:`BoundingBox`. Empty input gives a ``(0, 4)`` array.
    """
    if isinstance(boxes, np.ndarray) and boxes.size == 0:
        return np.zeros((0, 4), dtype=np.float64)
    if not isinstance(boxes, np.ndarray):
        boxes = list(boxes)
        if not boxes:
            return np.zeros((0, 4), dtype=np.float64)
        boxes = [np.asarray(b, dtype=np.float64) for b in boxes]
    arr = check_array(
        boxes,
        dtype=np.float64,
        ensure_min_samples=0,
        ensure_all_finite=True,
        input_name=name,
    )
    if arr.shape[1] != 4:
        raise InvalidBoxError(f"{name} must have 4 columns (cx, cy, w, h), got {arr.shape[1]}")
    bad = np.flatnonzero((arr[:, 2] <= 0) | (arr[:, 3] <= 0))
    if bad.size:
        raise InvalidBoxError(f"{name}[{bad[0]}] has nonpositive width/height: {arr[bad[0]].tolist()}")
    return arr


def to_corners(boxes: np.ndarray) -> np.ndarray:
    """``(..., 4)`` center-size -> corner form."""
    boxes = np.asarray(boxes, dtype=np.float64)
    half = boxes[..., 2:] / 2
    return np.concatenate([boxes[..., :2] - half, boxes[..., :2] + half], axis=-1)


def from_corners(corners: np.ndarray) -> np.ndarray:
    corners = np.asarray(corners, dtype=np.float64)
    return np.concatenate(
        [(corners[..., :2] + corners[..., 2:]) / 2, corners[..., 2:] - corners[..., :2]],
        axis=-1,
    )


@dataclass(frozen=True)
class Gaussian2D:
    """Axis-aligned 2D Gaussian: mean and the diagonal of the covariance."""

    mean: tuple[float, float]
    cov_diag: tuple[float, float]

    def __post_init__(self):
        if any(v < 0 or not math.isfinite(v) for v in self.cov_diag):
            raise ValueError(f"covariance diagonal must be finite and >= 0, got {self.cov_diag}")

    @property
    def std(self) -> tuple[float, float]:
        return (math.sqrt(self.cov_diag[0]), math.sqrt(self.cov_diag[1]))

    def _check_invertible(self):
        if self.cov_diag[0] == 0 or self.cov_diag[1] == 0:
            raise SingularCovarianceError(f"singular covariance {self.cov_diag}")


def box_to_gaussian(box) -> Gaussian2D:
    """Model a box as N(mu, Sigma) with mu = center and Sigma = diag(w^2/4, h^2/4).

    The box's inscribed ellipse is the Mahalanobis-distance-1 contour.
    """
    box = as_box(box)
    return Gaussian2D((box.cx, box.cy), (box.w * box.w / 4, box.h * box.h / 4))


def mahalanobis_sq(g: Gaussian2D, point: Sequence[float]) -> float:
    g._check_invertible()
    dx = point[0] - g.mean[0]
    dy = point[1] - g.mean[1]
    return dx * dx / g.cov_diag[0] + dy * dy / g.cov_diag[1]


def gaussian_pdf(g: Gaussian2D, point: Sequence[float]) -> float:
    g._check_invertible()
    det_sqrt = math.sqrt(g.cov_diag[0] * g.cov_diag[1])
    return math.exp(-0.5 * mahalanobis_sq(g, point)) / (2 * math.pi * det_sqrt)


def inscribed_ellipse_points(box, n: int = 64) -> Iterable[tuple[float, float]]:
    """Points on the ellipse inscribed in ``box``, evenly spaced in angle."""
    box = as_box(box)
    sx, sy = box.w / 2, box.h / 2
    for k in range(n):
        t = 2 * math.pi * k / n
        yield (sx * math.cos(t) + box.cx, sy * math.sin(t) + box.cy)

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AnchorGridConfig:
    """Anchor grid: per stride, one anchor per (scale, ratio) at every cell center.

    An anchor has area ``(scale * stride)^2`` and aspect ``h / w = ratio``.
    """

    strides: tuple[int, ...] = (8,)
    scales: tuple[float, ...] = (1.0,)
    ratios: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        for name in ("strides", "scales", "ratios"):
            vals = tuple(getattr(self, name))
            if not vals:
                raise ValueError(f"{name} must be nonempty")
            if any(v <= 0 for v in vals):
                raise ValueError(f"{name} must be positive, got {vals}")
            object.__setattr__(self, name, vals)

    def count(self, image_w: int, image_h: int) -> int:
        per_cell = len(self.scales) * len(self.ratios)
        return sum(math.ceil(image_w / s) * math.ceil(image_h / s) for s in self.strides) * per_cell


# two-stage detector RPN-style defaults: 32 px anchors at stride 4, up to 512 at 64
RPN_ANCHORS = AnchorGridConfig(strides=(4, 8, 16, 32, 64), scales=(8.0,), ratios=(0.5, 1.0, 2.0))


def generate_anchors(image_w: int, image_h: int, cfg: AnchorGridConfig = AnchorGridConfig()) -> np.ndarray:
    """Center-size anchors as an ``(n, 4)`` array.

    Order: strides in config order, then rows (y), columns (x), scales, ratios.
    """
    if image_w <= 0 or image_h <= 0:
        raise ValueError(f"image size must be positive, got {image_w}x{image_h}")
    blocks = []
    for s in cfg.strides:
        shapes = np.array(
            [
                (scale * s / math.sqrt(ratio), scale * s * math.sqrt(ratio))
                for scale in cfg.scales
                for ratio in cfg.ratios
            ]
        )
        xs = s / 2 + s * np.arange(math.ceil(image_w / s))
        ys = s / 2 + s * np.arange(math.ceil(image_h / s))
        cy, cx = np.meshgrid(ys, xs, indexing="ij")
        centers = np.stack([cx.ravel(), cy.ravel()], axis=1)
        k = len(shapes)
        block = np.empty((len(centers) * k, 4))
        block[:, :2] = np.repeat(centers, k, axis=0)
        block[:, 2:] = np.tile(shapes, (len(centers), 1))
        blocks.append(block)
    return np.concatenate(blocks, axis=0)

"""Seeded synthetic tiny-object scenes.

Randomness comes from :class:`SplitMix64`, implemented here so scenes are
bit-reproducible across platforms and numpy versions.
"""
from __future__ import annotations

from typing import Sequence

from .annotations import AnnotatedImage
from .geometry import BoundingBox

_MASK = (1 << 64) - 1


class SplitMix64:
    """Steele/Lea/Flood SplitMix64 generator."""

    GOLDEN = 0x9E3779B97F4A7C15

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + self.GOLDEN) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def split(self) -> "SplitMix64":
        return SplitMix64(self.next_u64())

    def random(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in ``[lo, hi]`` (inclusive), without modulo bias."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        n = hi - lo + 1
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return lo + x % n

    def choice_sign(self) -> int:
        return 1 if self.next_u64() >> 63 else -1

    def sample(self, population: Sequence, k: int) -> list:
        """``k`` distinct items via a partial Fisher-Yates shuffle."""
        pool = list(population)
        if k > len(pool):
            raise ValueError(f"cannot sample {k} items from {len(pool)}")
        for i in range(k):
            j = self.randint(i, len(pool) - 1)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]


def _image_dims(image_size) -> tuple[int, int]:
    if isinstance(image_size, int):
        return image_size, image_size
    w, h = image_size
    return int(w), int(h)


def synth_tiny_scene(
    seed: int,
    n_objects: int,
    size_range: tuple[int, int] = (2, 16),
    image_size: int | tuple[int, int] = 800,
    image_id: int = 1,
    category_id: int = 1,
) -> AnnotatedImage:
    """Random scene of integer-sized boxes that lie fully inside the image.

    Widths and heights are drawn independently from ``size_range``
    (inclusive); corner positions are integers.
    """
    lo, hi = size_range
    width, height = _image_dims(image_size)
    if n_objects < 0:
        raise ValueError("n_objects must be >= 0")
    if lo < 2 or hi < lo:
        raise ValueError(f"size_range must satisfy 2 <= min <= max, got {size_range}")
    if hi > min(width, height):
        raise ValueError(f"max size {hi} does not fit in a {width}x{height} image")

    rng = SplitMix64(seed)
    gts = []
    for _ in range(n_objects):
        w = rng.randint(lo, hi)
        h = rng.randint(lo, hi)
        x = rng.randint(0, width - w)
        y = rng.randint(0, height - h)
        gts.append((BoundingBox.from_xywh(x, y, w, h), category_id))
    return AnnotatedImage(image_id, width, height, gts)


def offset_grid_scene(
    seed: int,
    n_objects: int = 40,
    gt_size: int = 6,
    stride: int = 8,
    offset_range: tuple[int, int] = (2, 4),
    image_size: int = 128,
    image_id: int = 1,
) -> AnnotatedImage:
    """Square gts placed diagonally off the centers of a ``stride`` anchor grid.

    Each gt sits in its own grid cell, shifted by ``(+-d, +-d)`` pixels from the
    cell center with ``d`` drawn from ``offset_range``. With the defaults this is
    the 6x6-gt / 8x8-anchor scene where IoU-based assignment starves gts of
    positives.
    """
    lo, hi = offset_range
    if lo < 0 or hi < lo:
        raise ValueError(f"bad offset_range {offset_range}")
    n_cells = image_size // stride
    margin = hi + gt_size / 2 - stride / 2
    # keep boxes inside the image: skip border cells the offset could push out
    skip = max(0, -int(-margin // stride))
    cells = [
        (i, j)
        for j in range(skip, n_cells - skip)
        for i in range(skip, n_cells - skip)
    ]
    if n_objects > len(cells):
        raise ValueError(f"{n_objects} objects do not fit in {len(cells)} usable cells")

    rng = SplitMix64(seed)
    gts = []
    for i, j in rng.sample(cells, n_objects):
        d = rng.randint(lo, hi)
        cx = stride / 2 + i * stride + rng.choice_sign() * d
        cy = stride / 2 + j * stride + rng.choice_sign() * d
        gts.append((BoundingBox(cx, cy, gt_size, gt_size), 1))
    return AnnotatedImage(image_id, image_size, image_size, gts)

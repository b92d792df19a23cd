"""Pixel-pair affinity windows, ground-truth pyramids, and the training loss.

An affinity map at one pyramid level stores, for every pixel, the
probability that it belongs to the same instance as each neighbor in an
r x r window. Channel j corresponds to the row-major offset list of the
window, so channel (r*r - 1) // 2 is the pixel paired with itself and
channel r*r - 1 - j is the opposite direction of channel j.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid_io import INSTANCE_IDS, Pyramid, PyramidLevelGrid
from .rng import derive, uniform_stream


@dataclass(frozen=True)
class WindowGeometry:
    """Offsets of an r x r affinity window, row-major."""

    r: int

    def __post_init__(self):
        if self.r < 3 or self.r % 2 == 0:
            raise ValueError(f"window side must be odd and >= 3, got {self.r}")

    @property
    def offsets(self) -> list[tuple[int, int]]:
        half = (self.r - 1) // 2
        return [(dy, dx)
                for dy in range(-half, half + 1)
                for dx in range(-half, half + 1)]

    @property
    def channels(self) -> int:
        return self.r * self.r

    @property
    def center(self) -> int:
        return (self.r * self.r - 1) // 2

    def opposite(self, j: int) -> int:
        """Channel of the reversed offset: offsets[opp] == -offsets[j]."""
        return self.r * self.r - 1 - j


@dataclass
class AffinityMap:
    """Same-instance probabilities for in-window pixel pairs at one level.

    values: float32 (r*r, h, w); valid: bool (r*r, h, w), False where the
    offset neighbor falls outside the image. Invalid entries hold 0 and
    are ignored by every consumer.
    """

    level: int
    r: int
    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.values.shape != self.valid.shape:
            raise ValueError("values and valid shapes differ")
        if self.values.ndim != 3 or self.values.shape[0] != self.r * self.r:
            raise ValueError(f"expected ({self.r * self.r}, h, w) channels")

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]

    @property
    def window(self) -> WindowGeometry:
        return WindowGeometry(self.r)


@dataclass
class LossConfig:
    """Data-balancing rules for the affinity loss.

    Pixels whose ground-truth window is all ones are dropped with
    probability drop_all_ones_prob; pixels on object instances get their
    loss scaled by object_weight. Drops are decided first, weights apply
    to the survivors.
    """

    drop_all_ones_prob: float = 0.8
    object_weight: float = 3.0
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.drop_all_ones_prob <= 1.0:
            raise ValueError("drop_all_ones_prob must be in [0, 1]")
        if self.object_weight <= 0.0:
            raise ValueError("object_weight must be positive")


def subsample(grid: np.ndarray) -> np.ndarray:
    """Stride-2 top-left subsampling; output is ceil(h/2) x ceil(w/2)."""
    return grid[::2, ::2]


def gt_affinity_map(instance_ids: np.ndarray, r: int, level: int = 0) -> AffinityMap:
    """Binary ground-truth affinities for one label grid.

    y = 1 iff the two pixels carry the same id (background 0 paired with
    background 0 included), else 0.
    """
    geo = WindowGeometry(r)
    ids = np.asarray(instance_ids)
    h, w = ids.shape
    values = np.zeros((geo.channels, h, w), dtype=np.float32)
    valid = np.zeros((geo.channels, h, w), dtype=bool)
    for j, (dy, dx) in enumerate(geo.offsets):
        ys = slice(max(0, -dy), h - max(0, dy))
        xs = slice(max(0, -dx), w - max(0, dx))
        ns = slice(max(0, dy), h + min(0, dy))
        nxs = slice(max(0, dx), w + min(0, dx))
        valid[j, ys, xs] = True
        values[j, ys, xs] = (ids[ys, xs] == ids[ns, nxs]).astype(np.float32)
    return AffinityMap(level=level, r=r, values=values, valid=valid)


def gt_affinity_pyramid(instance_ids: PyramidLevelGrid, levels: int, r: int) -> Pyramid:
    """Ground-truth affinity pyramid from a finest-level instance map.

    Coarser instance maps come from stride-2 top-left subsampling of the
    previous level, so long-range relations are encoded by the same small
    window on progressively coarser grids.
    """
    if instance_ids.kind != INSTANCE_IDS:
        raise ValueError("gt_affinity_pyramid needs an instance_ids grid")
    if instance_ids.level != 0:
        raise ValueError("instance map must be at level 0")
    if levels < 1:
        raise ValueError("need at least one level")
    maps = []
    ids = instance_ids.data
    for l in range(levels):
        maps.append(gt_affinity_map(ids, r, level=l))
        ids = subsample(ids)
    return Pyramid(levels=maps, base_height=instance_ids.height,
                   base_width=instance_ids.width)


def affinity_loss(pred: AffinityMap, gt: AffinityMap, thing_mask: np.ndarray,
                  cfg: LossConfig) -> float:
    """Mean squared affinity error with all-ones dropping and object weighting.

    Per pixel the loss is the mean of (y - a)^2 over its valid channels;
    the total is the weighted mean over retained pixels. Deterministic for
    a fixed cfg.rng_seed: the drop decision of pixel (y, x) consumes entry
    y * w + x of the uniform stream regardless of image content.
    """
    if pred.values.shape != gt.values.shape:
        raise ValueError(f"shape mismatch {pred.values.shape} vs {gt.values.shape}")
    thing_mask = np.asarray(thing_mask, dtype=bool)
    if thing_mask.shape != gt.values.shape[1:]:
        raise ValueError("thing_mask shape mismatch")

    valid = pred.valid & gt.valid
    n_valid = valid.sum(axis=0)
    sq = ((gt.values - pred.values) ** 2 * valid).sum(axis=0, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        per_pixel = np.where(n_valid > 0, sq / np.maximum(n_valid, 1), 0.0)

    all_ones = ((gt.values >= 1.0) | ~valid).all(axis=0) & (n_valid > 0)
    h, w = n_valid.shape
    u = uniform_stream(derive(cfg.rng_seed, 0xA11), h * w).reshape(h, w)
    dropped = all_ones & (u < cfg.drop_all_ones_prob)

    retained = (n_valid > 0) & ~dropped
    weights = np.where(thing_mask, cfg.object_weight, 1.0)
    total_w = weights[retained].sum()
    if total_w == 0.0:
        return 0.0
    return float((per_pixel[retained] * weights[retained]).sum() / total_w)

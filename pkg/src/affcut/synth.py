"""Synthetic labeled scenes and simulated imperfect network outputs.

Scenes are painted shapes (rectangles, ellipses, L-shapes) on a background
grid. With occlusion enabled, later shapes overwrite earlier ones, which
can split an instance into disconnected visible parts; that is deliberate,
since grouping such parts back together is exactly what the long-range
affinity levels are for. Instances that end up invisible, or whose parts
drift further apart than `max_fragment_gap` (beyond what any affinity
window can reconnect at the finest level), are re-drawn.

Everything here is a pure function of (spec, seed) via the documented
splitmix64 generator, so scenes reproduce bit-exactly across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .affinity import AffinityMap
from .grid_io import CLASS_IDS, CLASS_SCORES, INSTANCE_IDS, PyramidLevelGrid
from .rng import SplitMix64, derive, normal_stream, uniform_stream

RECTANGLE = "rectangle"
ELLIPSE = "ellipse"
L_SHAPE = "L-shape"
ALL_SHAPES = (RECTANGLE, ELLIPSE, L_SHAPE)

GT_EPS = 1e-3   # ground-truth {0,1} affinities map to [eps, 1-eps] before noise
_OUT_EPS = 1e-6  # final safety clamp keeping float32 values in the open interval

_EIGHT_CONN = np.ones((3, 3), dtype=bool)


class SceneTooCrowdedError(RuntimeError):
    """Raised when the retry cap is hit while placing instances."""


@dataclass
class SceneSpec:
    base_height: int
    base_width: int
    num_instances: int
    shape_kinds: tuple = ALL_SHAPES
    class_count: int = 2
    occlusion: bool = True
    rng_seed: int = 0
    # Shape extents per axis, as fractions of min(base_height, base_width).
    min_size_frac: float = 0.25
    max_size_frac: float = 0.5
    # Largest allowed Chebyshev gap between visible parts of one instance;
    # parts further apart than an affinity window can bridge are re-drawn.
    max_fragment_gap: int = 2

    def __post_init__(self):
        if self.num_instances < 0:
            raise ValueError("num_instances must be >= 0")
        if self.class_count < 2:
            raise ValueError("class_count must be >= 2 (class 0 is background)")
        kinds = tuple(self.shape_kinds)
        if not kinds or any(k not in ALL_SHAPES for k in kinds):
            raise ValueError(f"shape_kinds must be a nonempty subset of {ALL_SHAPES}")
        self.shape_kinds = kinds


@dataclass
class NoiseSpec:
    flip_prob: float = 0.0
    logistic_sigma: float = 0.0
    semantic_corrupt_prob: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("flip_prob", "semantic_corrupt_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.logistic_sigma < 0.0:
            raise ValueError("logistic_sigma must be >= 0")


def _draw_shape(rng: SplitMix64, spec: SceneSpec) -> np.ndarray:
    """One shape as a full-canvas boolean mask, fully inside the image."""
    h, w = spec.base_height, spec.base_width
    base = min(h, w)
    lo = max(3, round(spec.min_size_frac * base))
    hi = min(base, max(lo, round(spec.max_size_frac * base)))
    kind = rng.choice(sorted(spec.shape_kinds))
    sh = rng.randint(lo, min(hi, h))
    sw = rng.randint(lo, min(hi, w))
    top = rng.randint(0, h - sh)
    left = rng.randint(0, w - sw)
    mask = np.zeros((h, w), dtype=bool)
    if kind == RECTANGLE:
        mask[top:top + sh, left:left + sw] = True
    elif kind == ELLIPSE:
        ry, rx = (sh - 1) / 2.0, (sw - 1) / 2.0
        cy, cx = top + ry, left + rx
        yy, xx = np.ogrid[:h, :w]
        mask[((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0] = True
    else:  # L_SHAPE: a vertical and a horizontal bar sharing one corner
        ty = rng.randint(max(2, sh // 3), max(2, sh // 2))
        tx = rng.randint(max(2, sw // 3), max(2, sw // 2))
        corner = rng.randint(0, 3)
        vert = np.zeros((h, w), dtype=bool)
        horiz = np.zeros((h, w), dtype=bool)
        if corner in (0, 2):  # bar on the left
            vert[top:top + sh, left:left + tx] = True
        else:
            vert[top:top + sh, left + sw - tx:left + sw] = True
        if corner in (0, 1):  # bar at the bottom
            horiz[top + sh - ty:top + sh, left:left + sw] = True
        else:
            horiz[top:top + ty, left:left + sw] = True
        mask = vert | horiz
    return mask


def _paint(shapes: list, h: int, w: int) -> np.ndarray:
    """Painter's algorithm: instance i+1 overwrites everything below it."""
    canvas = np.zeros((h, w), dtype=np.uint32)
    for i, mask in enumerate(shapes):
        canvas[mask] = i + 1
    return canvas


def _fragments_bindable(mask: np.ndarray, max_gap: int) -> bool:
    """True if the visible parts sit within max_gap (Chebyshev) of each other.

    Parts form a graph with edges between components closer than max_gap;
    the instance is acceptable when that graph is connected, since a chain
    of near parts is still bridged by in-window affinities.
    """
    comps, n = ndimage.label(mask, structure=_EIGHT_CONN)
    if n <= 1:
        return True
    groups = list(range(n))

    def find(i):
        while groups[i] != i:
            groups[i] = groups[groups[i]]
            i = groups[i]
        return i

    for k in range(1, n + 1):
        d = ndimage.distance_transform_cdt(comps != k, metric="chessboard")
        for j in range(k + 1, n + 1):
            if d[comps == j].min() <= max_gap:
                a, b = find(k - 1), find(j - 1)
                groups[a] = b
    return len({find(i) for i in range(n)}) == 1


def generate_scene(spec: SceneSpec) -> tuple[PyramidLevelGrid, PyramidLevelGrid]:
    """Deterministic scene: instance-id grid plus consistent class-id grid.

    Raises SceneTooCrowdedError when placements keep failing (instances
    fully hidden, over-fragmented, or, without occlusion, overlapping).
    """
    h, w = spec.base_height, spec.base_width
    n = spec.num_instances
    rng = SplitMix64(spec.rng_seed)
    classes = [rng.randint(1, spec.class_count - 1) for _ in range(n)]

    if n == 0:
        inst = np.zeros((h, w), dtype=np.uint32)
        return (PyramidLevelGrid(0, INSTANCE_IDS, inst),
                PyramidLevelGrid(0, CLASS_IDS, np.zeros((h, w), dtype=np.uint32)))

    shapes: list = [None] * n
    if spec.occlusion:
        for i in range(n):
            shapes[i] = _draw_shape(rng, spec)
        for _ in range(100):
            canvas = _paint(shapes, h, w)
            bad = [i for i in range(n)
                   if not (canvas == i + 1).any()
                   or not _fragments_bindable(canvas == i + 1, spec.max_fragment_gap)]
            if not bad:
                break
            for i in bad:
                shapes[i] = _draw_shape(rng, spec)
        else:
            raise SceneTooCrowdedError("could not place all instances visibly")
    else:
        occupied = np.zeros((h, w), dtype=bool)
        for i in range(n):
            for _ in range(200):
                mask = _draw_shape(rng, spec)
                if not (mask & occupied).any():
                    break
            else:
                raise SceneTooCrowdedError("no room for disjoint instance")
            shapes[i] = mask
            occupied |= mask
        canvas = _paint(shapes, h, w)

    class_map = np.zeros((h, w), dtype=np.uint32)
    for i in range(n):
        class_map[canvas == i + 1] = classes[i]
    return (PyramidLevelGrid(0, INSTANCE_IDS, canvas),
            PyramidLevelGrid(0, CLASS_IDS, class_map))


def scores_from_classes(class_ids: PyramidLevelGrid, confidence: float) -> PyramidLevelGrid:
    """Synthetic class-score field: true class gets `confidence`, the rest
    split the remaining mass evenly."""
    if class_ids.kind != CLASS_IDS:
        raise ValueError("scores_from_classes needs a class_ids grid")
    cm = class_ids.data
    c = int(cm.max()) + 1 if cm.size else 1
    # the field must cover at least the classes present; caller may want more
    return scores_from_class_map(cm, max(c, 2), confidence, level=class_ids.level)


def scores_from_class_map(class_map: np.ndarray, class_count: int,
                          confidence: float, level: int = 0) -> PyramidLevelGrid:
    if not (1.0 / class_count) < confidence <= 1.0:
        raise ValueError(f"confidence must be in (1/{class_count}, 1]")
    h, w = class_map.shape
    rest = (1.0 - confidence) / (class_count - 1)
    scores = np.full((class_count, h, w), rest, dtype=np.float32)
    np.put_along_axis(scores, class_map[None].astype(np.int64),
                      np.float32(confidence), axis=0)
    return PyramidLevelGrid(level, CLASS_SCORES, scores)


def perturb_affinity(gt: AffinityMap, noise: NoiseSpec) -> AffinityMap:
    """Simulate an imperfect affinity prediction from a ground-truth map.

    Order: flip y to 1-y with flip_prob, squeeze {0,1} to [eps, 1-eps],
    then add Gaussian noise in logit space and squash back. Invalid
    channels stay zero. Deterministic for a fixed noise.rng_seed.
    """
    y = gt.values.astype(np.float64)
    nchan = y.size
    if noise.flip_prob > 0.0:
        u = uniform_stream(derive(noise.rng_seed, 1), nchan).reshape(y.shape)
        y = np.where(u < noise.flip_prob, 1.0 - y, y)
    p = np.clip(y, GT_EPS, 1.0 - GT_EPS)
    if noise.logistic_sigma > 0.0:
        z = np.log(p / (1.0 - p))
        z += noise.logistic_sigma * normal_stream(
            derive(noise.rng_seed, 2), nchan).reshape(y.shape)
        p = 1.0 / (1.0 + np.exp(-z))
        p = np.clip(p, _OUT_EPS, 1.0 - _OUT_EPS)
    out = np.where(gt.valid, p, 0.0).astype(np.float32)
    return AffinityMap(level=gt.level, r=gt.r, values=out, valid=gt.valid.copy())


def perturb_scores(scores: PyramidLevelGrid, noise: NoiseSpec) -> PyramidLevelGrid:
    """Replace each pixel's score vector, with semantic_corrupt_prob, by a
    random probability vector (flat Dirichlet via normalized exponentials)."""
    if scores.kind != CLASS_SCORES:
        raise ValueError("perturb_scores needs a class_scores grid")
    c, h, w = scores.data.shape
    u = uniform_stream(derive(noise.rng_seed, 3), h * w).reshape(h, w)
    hit = u < noise.semantic_corrupt_prob
    e = -np.log1p(-uniform_stream(derive(noise.rng_seed, 4), c * h * w))
    e = e.reshape(c, h, w)
    rand = (e / e.sum(axis=0)).astype(np.float32)
    out = np.where(hit[None], rand, scores.data)
    return PyramidLevelGrid(scores.level, CLASS_SCORES, out)

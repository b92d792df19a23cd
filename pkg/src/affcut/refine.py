"""Final-level refinement and instance extraction.

The earlier cascade levels partition each semantic class separately. The
final pass runs one partition over every foreground pixel, first
attenuating each pair's average affinity by exp(-JS) of the endpoints'
class-score distributions: pairs the semantics agree on keep their
affinity, pairs it disputes get pushed toward (but never across more
than) a factor of one half. Because attenuation never increases an
affinity, strong within-instance evidence can still override a semantic
split, which is what lets this stage fix semantic errors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .affinity import AffinityMap
from .cascade import contract_with_proposals, segment_pixel_sets
from .grid_io import CLASS_SCORES, INSTANCE_IDS, PyramidLevelGrid
from .partition import SolverConfig, build_graph, solve_greedy_contract

def _kl(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Sum over classes of p * ln(p / q), with 0 * ln(0 / q) = 0.

    Natural logarithm throughout, so the JS divergence tops out at ln 2.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        t = p * np.log(p / q)
    return np.where(p > 0.0, t, 0.0).sum(axis=0)


def js_divergence_fields(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Jensen-Shannon divergence column-wise for (C, n) score stacks."""
    m = 0.5 * (p + q)
    return 0.5 * (_kl(p, m) + _kl(q, m))


def js_divergence(p, q) -> float:
    """JS divergence of two distributions; symmetric, in [0, ln 2]."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    return float(js_divergence_fields(p[:, None], q[:, None])[0])


def refine_affinity(alpha: float, s_u, s_v) -> float:
    """Attenuate one averaged affinity by the endpoints' class disagreement."""
    return float(alpha * np.exp(-js_divergence(s_u, s_v)))


def final_partition(level0_affinity: AffinityMap, proposals: list,
                    class_scores: PyramidLevelGrid, thing_classes: set,
                    solver: SolverConfig, stats: dict | None = None) -> PyramidLevelGrid:
    """One partition over all pixels whose argmax class is a thing class.

    Edge affinities are attenuated by exp(-JS) of the endpoint score
    vectors before the logit; proposals from the cascade enter as atomic
    super-nodes. Returns the level-0 instance-id grid. When `stats` is
    given it receives the contracted node/edge counts for reporting.
    """
    if class_scores.kind != CLASS_SCORES:
        raise ValueError("expected a class_scores grid")
    scores = class_scores.data.astype(np.float64)
    c, h, w = scores.shape
    if (h, w) != (level0_affinity.height, level0_affinity.width):
        raise ValueError("class scores and affinity map disagree in shape")
    cm = scores.argmax(axis=0)
    mask = np.isin(cm, sorted(int(t) for t in thing_classes))
    flat = scores.reshape(c, h * w)

    def attenuate(alpha, u_lin, v_lin):
        d = js_divergence_fields(flat[:, u_lin], flat[:, v_lin])
        return alpha * np.exp(-d)

    g = build_graph(level0_affinity, mask, alpha_transform=attenuate)
    pixel_nodes = g.node_count
    trimmed = []
    flat_mask = mask.ravel()
    for p in proposals:
        pix = p.pixels[flat_mask[p.pixels]]
        if len(pix):
            trimmed.append(type(p)(p.segment_id, pix, p.class_id))
    if trimmed:
        g = contract_with_proposals(g, trimmed)
    part = solve_greedy_contract(g, solver)
    if stats is not None:
        stats.update(nodes=g.node_count, edges=g.edge_count,
                     pixel_nodes=pixel_nodes)

    labels = np.zeros((h, w), dtype=np.uint32)
    for nid, pixels in enumerate(segment_pixel_sets(g, part), start=1):
        labels.ravel()[pixels] = nid
    return PyramidLevelGrid(0, INSTANCE_IDS, labels)


@dataclass
class Instance:
    pixels: np.ndarray   # sorted linear indices at level 0
    class_id: int
    score: float


@dataclass
class InstanceSet:
    """Final scored, classed instance masks, sorted by descending score."""

    height: int
    width: int
    instances: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)


def postprocess(labels: PyramidLevelGrid, class_scores: PyramidLevelGrid,
                thing_classes: set, min_area: int = 0) -> InstanceSet:
    """Class voting, small-instance removal, and score ranking.

    Each segment's class is the majority per-pixel argmax restricted to
    thing classes (ties to the smaller class id); its score is the mean
    score of the voted class over its pixels. Segments below min_area,
    or with no thing-class votes at all, are dropped.
    """
    if labels.kind != INSTANCE_IDS:
        raise ValueError("expected an instance_ids grid")
    lab = labels.data
    scores = class_scores.data
    cm = scores.argmax(axis=0).ravel()
    things = sorted(int(t) for t in thing_classes)
    flat = lab.ravel()
    out = []
    for seg in np.unique(lab):
        if seg == 0:
            continue
        pixels = np.flatnonzero(flat == seg)
        if len(pixels) < min_area:
            continue
        votes = cm[pixels]
        counts = {c: int((votes == c).sum()) for c in things}
        counts = {c: n for c, n in counts.items() if n > 0}
        if not counts:
            continue
        cls = min(counts, key=lambda c: (-counts[c], c))
        score = float(scores[cls].ravel()[pixels].mean())
        out.append(Instance(pixels=pixels, class_id=cls, score=score))
    out.sort(key=lambda inst: (-inst.score, inst.class_id, int(inst.pixels[0])))
    return InstanceSet(height=labels.height, width=labels.width, instances=out)


def rle_encode(pixels: np.ndarray, height: int, width: int) -> list:
    """Row-major run lengths alternating background/foreground, background
    first. Sum of runs equals height * width."""
    flat = np.zeros(height * width, dtype=bool)
    flat[pixels] = True
    changes = np.flatnonzero(np.diff(flat.astype(np.int8)))
    bounds = np.concatenate([[0], changes + 1, [flat.size]])
    runs = np.diff(bounds).tolist()
    if flat.size and flat[0]:
        runs = [0] + runs
    return [int(r) for r in runs]


def rle_decode(runs: list, height: int, width: int) -> np.ndarray:
    total = sum(runs)
    if total != height * width:
        raise ValueError(f"run lengths sum to {total}, expected {height * width}")
    flat = np.zeros(height * width, dtype=bool)
    pos = 0
    fg = False
    for r in runs:
        if fg:
            flat[pos:pos + r] = True
        pos += r
        fg = not fg
    return np.flatnonzero(flat)


def instance_set_to_dict(inst: InstanceSet) -> dict:
    return {
        "height": inst.height,
        "width": inst.width,
        "instances": [
            {"class_id": i.class_id, "score": i.score,
             "rle": rle_encode(i.pixels, inst.height, inst.width)}
            for i in inst.instances
        ],
    }


def instance_set_from_dict(d: dict) -> InstanceSet:
    h, w = int(d["height"]), int(d["width"])
    instances = [
        Instance(pixels=rle_decode(e["rle"], h, w),
                 class_id=int(e["class_id"]), score=float(e["score"]))
        for e in d["instances"]
    ]
    return InstanceSet(height=h, width=w, instances=instances)

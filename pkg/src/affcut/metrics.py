"""Instance-segmentation metrics: IoU matching, AP, and PQ/SQ/RQ.

AP follows the protocol of averaging precisions over IoU thresholds 0.50
to 0.95 in steps of 0.05, with all-point interpolation (the precision
envelope). PQ matches segments of equal class at IoU > 0.5, which makes
the matching unique, then scores sum(IoU) / (TP + FP/2 + FN/2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid_io import PyramidLevelGrid
from .refine import Instance, InstanceSet

AP_THRESHOLDS = tuple(round(0.50 + 0.05 * k, 2) for k in range(10))


def iou(a, b) -> float:
    """Intersection over union of two pixel sets; 0 when both are empty."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    inter = len(np.intersect1d(a, b, assume_unique=True))
    union = len(a) + len(b) - inter
    return inter / union if union else 0.0


@dataclass
class MatchResult:
    """Unique matching between predicted and ground-truth segments."""

    tp: list = field(default_factory=list)   # (pred_idx, gt_idx, iou)
    fp: list = field(default_factory=list)   # unmatched prediction indices
    fn: list = field(default_factory=list)   # unmatched ground-truth indices


def _rank_key(inst: Instance):
    # descending score; ties broken by the mask itself for determinism
    return (-inst.score, tuple(inst.pixels.tolist()))


def average_precision(pred: InstanceSet, gt: InstanceSet,
                      thresholds=AP_THRESHOLDS):
    """Per-class and mean AP over the given IoU thresholds.

    Predictions are ranked by descending score and greedily matched to the
    unmatched ground truth with the highest IoU; the match counts when the
    IoU reaches the threshold. Classes absent from the ground truth are
    ignored.
    """
    classes = sorted({i.class_id for i in gt.instances})
    per_class = {}
    for c in classes:
        gts = [i.pixels for i in gt.instances if i.class_id == c]
        preds = sorted((i for i in pred.instances if i.class_id == c),
                       key=_rank_key)
        ious = np.zeros((len(preds), len(gts)))
        for pi, p in enumerate(preds):
            for gi, gpix in enumerate(gts):
                ious[pi, gi] = iou(p.pixels, gpix)
        aps = []
        for thr in thresholds:
            taken = [False] * len(gts)
            tp_flags = []
            for pi in range(len(preds)):
                best_gi, best = -1, 0.0
                for gi in range(len(gts)):
                    if not taken[gi] and ious[pi, gi] > best:
                        best_gi, best = gi, ious[pi, gi]
                if best_gi >= 0 and best >= thr:
                    taken[best_gi] = True
                    tp_flags.append(True)
                else:
                    tp_flags.append(False)
            aps.append(_ap_from_flags(tp_flags, len(gts)))
        per_class[c] = float(np.mean(aps)) if aps else 0.0
    mean = float(np.mean(list(per_class.values()))) if per_class else 0.0
    return per_class, mean


def _ap_from_flags(tp_flags: list, n_gt: int) -> float:
    """Area under the interpolated precision-recall curve."""
    if n_gt == 0:
        return 0.0
    if not tp_flags:
        return 0.0
    tp = np.cumsum(tp_flags)
    fp = np.cumsum([not t for t in tp_flags])
    recall = tp / n_gt
    precision = tp / (tp + fp)
    env = np.maximum.accumulate(precision[::-1])[::-1]
    prev = 0.0
    ap = 0.0
    for r, p in zip(recall, env):
        if r > prev:
            ap += (r - prev) * p
            prev = r
    return float(ap)


def _segments(labels: np.ndarray, classes: dict) -> list:
    """(class_id, pixel set) per segment; id 0, when present, is one
    background stuff segment of class 0."""
    flat = labels.ravel()
    segs = []
    for seg in np.unique(labels):
        pixels = np.flatnonzero(flat == seg)
        if seg == 0:
            segs.append((0, pixels))
        else:
            segs.append((int(classes[int(seg)]), pixels))
    return segs


def match_segments(pred_segs: list, gt_segs: list) -> MatchResult:
    """Match same-class segments at IoU > 0.5; the overlap bound makes the
    matching unique, which is asserted rather than assumed."""
    res = MatchResult()
    pred_used = [False] * len(pred_segs)
    gt_used = [False] * len(gt_segs)
    for gi, (gc, gpix) in enumerate(gt_segs):
        for pi, (pc, ppix) in enumerate(pred_segs):
            if pc != gc:
                continue
            v = iou(ppix, gpix)
            if v > 0.5:
                assert not pred_used[pi] and not gt_used[gi], \
                    "IoU > 0.5 matching produced a duplicate match"
                pred_used[pi] = True
                gt_used[gi] = True
                res.tp.append((pi, gi, v))
    res.fp = [pi for pi, used in enumerate(pred_used) if not used]
    res.fn = [gi for gi, used in enumerate(gt_used) if not used]
    return res


@dataclass
class PQResult:
    pq: float
    sq: float
    rq: float
    pq_things: float


def _pq_from_match(m: MatchResult) -> tuple:
    tp = len(m.tp)
    denom = tp + 0.5 * len(m.fp) + 0.5 * len(m.fn)
    iou_sum = sum(v for _, _, v in m.tp)
    if denom == 0:
        return 0.0, 0.0, 0.0
    sq = iou_sum / tp if tp else 0.0
    rq = tp / denom
    return iou_sum / denom, sq, rq


def panoptic_quality(pred_labels: PyramidLevelGrid, pred_classes: dict,
                     gt_labels: PyramidLevelGrid, gt_classes: dict,
                     thing_classes: set) -> PQResult:
    """PQ, SQ, RQ over all segments, plus PQ restricted to thing classes.

    Instance ids are segments of their class; the id-0 region counts as a
    single background stuff segment when nonempty.
    """
    if pred_labels.data.shape != gt_labels.data.shape:
        raise ValueError("resolution mismatch")
    pred_segs = _segments(pred_labels.data, pred_classes)
    gt_segs = _segments(gt_labels.data, gt_classes)
    pq, sq, rq = _pq_from_match(match_segments(pred_segs, gt_segs))
    things = {int(t) for t in thing_classes}
    pred_th = [s for s in pred_segs if s[0] in things]
    gt_th = [s for s in gt_segs if s[0] in things]
    pq_th, _, _ = _pq_from_match(match_segments(pred_th, gt_th))
    return PQResult(pq=pq, sq=sq, rq=rq, pq_things=pq_th)


def segment_classes_from_map(labels: PyramidLevelGrid,
                             class_ids: PyramidLevelGrid) -> dict:
    """Majority class per instance id; exact when the maps are consistent."""
    lab = labels.data.ravel()
    cls = class_ids.data.ravel()
    out = {}
    for seg in np.unique(labels.data):
        if seg == 0:
            continue
        votes = cls[lab == seg]
        vals, counts = np.unique(votes, return_counts=True)
        out[int(seg)] = int(vals[counts.argmax()])
    return out


def instances_from_maps(labels: PyramidLevelGrid, class_ids: PyramidLevelGrid,
                        score: float = 1.0) -> InstanceSet:
    """Ground-truth InstanceSet from instance-id and class-id grids."""
    classes = segment_classes_from_map(labels, class_ids)
    flat = labels.data.ravel()
    instances = [Instance(pixels=np.flatnonzero(flat == seg),
                          class_id=cls, score=score)
                 for seg, cls in sorted(classes.items())]
    return InstanceSet(height=labels.height, width=labels.width,
                       instances=instances)

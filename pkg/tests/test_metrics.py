import numpy as np
import pytest

from affcut.grid_io import INSTANCE_IDS, PyramidLevelGrid
from affcut.metrics import (AP_THRESHOLDS, average_precision,
                            instances_from_maps, iou, match_segments,
                            panoptic_quality, segment_classes_from_map)
from affcut.metrics import _pq_from_match
from affcut.refine import Instance, InstanceSet
from affcut.synth import SceneSpec, generate_scene


def test_iou_basic():
    a = np.array([1, 2, 3, 4])
    assert iou(a, a) == 1.0
    assert iou(a, np.array([7, 8])) == 0.0
    assert iou(np.array([]), np.array([])) == 0.0
    # 2x2 blocks sharing 2 pixels: 2 / 6
    assert abs(iou(np.array([0, 1, 10, 11]), np.array([1, 2, 11, 12])) - 2 / 6) < 1e-12


def _inst(pixels, cls, score, h=4, w=8):
    return Instance(pixels=np.array(pixels, dtype=np.int64),
                    class_id=cls, score=score)


def _iset(instances, h=4, w=8):
    return InstanceSet(height=h, width=w, instances=instances)


def test_ap_perfect_prediction():
    gt = _iset([_inst([0, 1, 2], 1, 1.0), _inst([8, 9], 1, 1.0)])
    pred = _iset([_inst([0, 1, 2], 1, 0.3), _inst([8, 9], 1, 0.9)])
    per_class, mean = average_precision(pred, gt)
    assert mean == 1.0 and per_class == {1: 1.0}


def test_ap_no_predictions():
    gt = _iset([_inst([0, 1], 1, 1.0)])
    _, mean = average_precision(_iset([]), gt)
    assert mean == 0.0


def test_ap_half_with_missing_gt():
    gt = _iset([_inst([0, 1, 2], 1, 1.0), _inst([8, 9, 10], 1, 1.0)])
    pred = _iset([_inst([0, 1, 2], 1, 0.8)])
    for thr in AP_THRESHOLDS:
        per_class, mean = average_precision(pred, gt, thresholds=[thr])
        assert mean == 0.5


def test_ap_monotone_in_threshold():
    rng = np.random.default_rng(42)
    flat = np.arange(64)
    gt = _iset([_inst(flat[:20], 1, 1.0), _inst(flat[20:40], 1, 1.0)], h=8, w=8)
    pred = _iset([_inst(flat[:15], 1, 0.9), _inst(flat[18:40], 1, 0.8),
                  _inst(flat[40:50], 1, 0.7)], h=8, w=8)
    values = [average_precision(pred, gt, thresholds=[t])[1]
              for t in AP_THRESHOLDS]
    assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))


def test_ap_ignores_classes_missing_from_gt():
    gt = _iset([_inst([0, 1], 1, 1.0)])
    pred = _iset([_inst([0, 1], 1, 0.9), _inst([4, 5], 2, 0.9)])
    per_class, mean = average_precision(pred, gt)
    assert set(per_class) == {1}
    assert mean == 1.0


def test_match_segments_unique_and_correct():
    gt = [(1, np.arange(10))]
    pred = [(1, np.arange(8)), (1, np.arange(8, 12))]
    m = match_segments(pred, gt)
    assert m.tp == [(0, 0, 0.8)]
    assert m.fp == [1] and m.fn == []


def test_pq_formula_examples():
    # matched pair at IoU 0.8: PQ = SQ = 0.8, RQ = 1
    gt = [(1, np.arange(10))]
    pred = [(1, np.arange(8))]
    pq, sq, rq = _pq_from_match(match_segments(pred, gt))
    assert abs(pq - 0.8) < 1e-12 and abs(sq - 0.8) < 1e-12 and rq == 1.0
    # IoU 0.4 pair never matches: PQ = 0 with one FP and one FN
    pred = [(1, np.arange(4))]
    m = match_segments(pred, gt)
    assert m.tp == [] and m.fp == [0] and m.fn == [0]
    pq, sq, rq = _pq_from_match(m)
    assert pq == 0.0 and sq == 0.0 and rq == 0.0


def _labels(arr):
    return PyramidLevelGrid(0, INSTANCE_IDS, np.asarray(arr, dtype=np.uint32))


def test_panoptic_quality_perfect():
    grid = np.zeros((4, 4), dtype=np.uint32)
    grid[:2] = 1
    grid[2:, :2] = 2
    classes = {1: 1, 2: 2}
    res = panoptic_quality(_labels(grid), classes, _labels(grid), classes, {1, 2})
    assert res.pq == res.sq == res.rq == 1.0
    assert res.pq_things == 1.0


def test_panoptic_quality_resolution_mismatch():
    with pytest.raises(ValueError):
        panoptic_quality(_labels(np.zeros((2, 2))), {}, _labels(np.zeros((3, 3))), {}, set())


def test_panoptic_quality_thing_restriction():
    # prediction misses 2 of 10 pixels of the single thing instance
    gt = np.zeros((1, 12), dtype=np.uint32)
    gt[0, :10] = 1
    pred = np.zeros((1, 12), dtype=np.uint32)
    pred[0, :8] = 1
    res = panoptic_quality(_labels(pred), {1: 1}, _labels(gt), {1: 1}, {1})
    # things only: one TP at IoU 0.8
    assert abs(res.pq_things - 0.8) < 1e-12
    # overall: the background segments overlap at IoU 0.5, not above it,
    # so they stay unmatched and drag PQ down
    assert abs(res.pq - 0.8 / 2.0) < 1e-12


def test_metrics_invariant_under_id_permutation():
    spec = SceneSpec(48, 48, 4, class_count=4, occlusion=True, rng_seed=8)
    inst, cls = generate_scene(spec)
    things = {1, 2, 3}
    gt_set = instances_from_maps(inst, cls)
    gt_classes = segment_classes_from_map(inst, cls)
    base_ap = average_precision(gt_set, gt_set)[1]
    base_pq = panoptic_quality(inst, gt_classes, inst, gt_classes, things).pq
    assert base_ap == 1.0 and base_pq == 1.0
    rng = np.random.default_rng(0)
    for _ in range(10):
        perm = rng.permutation(4)  # ids 1..4 -> shuffled
        remap = np.zeros(5, dtype=np.uint32)
        remap[1:] = perm + 1
        shuffled = PyramidLevelGrid(0, INSTANCE_IDS, remap[inst.data])
        sh_classes = {int(remap[k]): v for k, v in gt_classes.items()}
        res = panoptic_quality(shuffled, sh_classes, inst, gt_classes, things)
        assert res.pq == 1.0
        sh_set = instances_from_maps(shuffled, cls)
        assert average_precision(sh_set, gt_set)[1] == 1.0


def test_instances_from_maps():
    grid = np.zeros((2, 4), dtype=np.uint32)
    grid[0, :2] = 1
    grid[1, 2:] = 5
    cls = np.zeros((2, 4), dtype=np.uint32)
    cls[0, :2] = 2
    cls[1, 2:] = 1
    out = instances_from_maps(_labels(grid),
                              PyramidLevelGrid(0, "class_ids", cls))
    assert [(i.class_id, i.score) for i in out.instances] == [(2, 1.0), (1, 1.0)]

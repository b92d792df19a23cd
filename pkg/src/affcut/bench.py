"""End-to-end pipeline glue and the cascaded-vs-flat benchmark harness.

The benchmark generates synthetic scenes, runs the full post-network
pipeline once per requested initial level, and reports per-level node and
edge counts, wall-clock partition time (median over repeats, monotonic
clock), and AP/PQ against the ground truth. Quality columns are
deterministic; only the timings vary run to run.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .affinity import gt_affinity_pyramid
from .cascade import CascadeConfig, proposals_from_partition, run_cascade
from .grid_io import INSTANCE_IDS, Pyramid, PyramidLevelGrid
from .metrics import (average_precision, instances_from_maps, panoptic_quality,
                      segment_classes_from_map)
from .partition import SolverConfig
from .refine import InstanceSet, final_partition, postprocess
from .rng import derive
from .synth import (NoiseSpec, SceneSpec, generate_scene, perturb_affinity,
                    perturb_scores, scores_from_class_map)


@dataclass
class PipelineResult:
    labels: PyramidLevelGrid      # level-0 instance ids
    instances: InstanceSet
    timing: list                  # rows: level, nodes, edges, seconds, pixel_nodes

    @property
    def total_seconds(self) -> float:
        return sum(row["seconds"] for row in self.timing)


def run_pipeline(affinity_pyramid: Pyramid, class_scores: PyramidLevelGrid,
                 thing_classes: set, cascade_cfg: CascadeConfig,
                 solver_cfg: SolverConfig, min_area: int = 0,
                 threads: int = 1) -> PipelineResult:
    """Cascade from init_level down to level 1, then the refined
    all-foreground partition at level 0, then instance post-processing."""
    labels_l1, _, rows = run_cascade(affinity_pyramid, class_scores,
                                     thing_classes, cascade_cfg, solver_cfg,
                                     threads=threads)
    shape0 = (affinity_pyramid[0].height, affinity_pyramid[0].width)
    t0 = time.perf_counter()
    proposals = []
    if labels_l1 is not None:
        proposals = proposals_from_partition(labels_l1.data, shape0, cascade_cfg)
    stats: dict = {}
    labels0 = final_partition(affinity_pyramid[0], proposals, class_scores,
                              thing_classes, solver_cfg, stats=stats)
    rows = rows + [{"level": 0, "nodes": stats.get("nodes", 0),
                    "edges": stats.get("edges", 0),
                    "seconds": time.perf_counter() - t0,
                    "pixel_nodes": stats.get("pixel_nodes", 0)}]
    instances = postprocess(labels0, class_scores, thing_classes, min_area)
    return PipelineResult(labels=labels0, instances=instances, timing=rows)


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)

    def to_text(self) -> str:
        header = f"{'scene':>5} {'init':>4} {'seconds':>9} {'AP':>6} {'PQ':>6}  nodes/level"
        lines = [header, "-" * len(header)]
        for r in self.rows:
            levels = " ".join(
                f"L{s['level']}:{s['nodes']}" for s in r["levels"])
            lines.append(
                f"{r['scene']:>5} {r['init_level']:>4} {r['seconds']:>9.4f} "
                f"{r['ap']:>6.3f} {r['pq']:>6.3f}  {levels}")
        return "\n".join(lines)


def _scene_inputs(spec: SceneSpec, noise: NoiseSpec | None, levels: int,
                  r: int, confidence: float):
    inst, cls = generate_scene(spec)
    pyramid = gt_affinity_pyramid(inst, levels, r)
    scores = scores_from_class_map(cls.data, spec.class_count, confidence)
    if noise is not None:
        maps = [perturb_affinity(m, replace(noise, rng_seed=derive(noise.rng_seed, m.level)))
                for m in pyramid.levels]
        pyramid = Pyramid(maps, pyramid.base_height, pyramid.base_width)
        if noise.semantic_corrupt_prob > 0.0:
            scores = perturb_scores(scores, noise)
    things = set(range(1, spec.class_count))
    return inst, cls, pyramid, scores, things


def bench_cascade(scene_specs: list, noise: NoiseSpec | None,
                  init_levels: list, repeats: int = 1, *,
                  levels: int = 5, r: int = 5, confidence: float = 0.9,
                  cascade: CascadeConfig = CascadeConfig(),
                  solver: SolverConfig = SolverConfig(),
                  min_area: int = 0, threads: int = 1) -> BenchReport:
    """One report row per (scene spec, init level)."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    report = BenchReport()
    for si, spec in enumerate(scene_specs):
        inst, cls, pyramid, scores, things = _scene_inputs(
            spec, noise, levels, r, confidence)
        gt_set = instances_from_maps(inst, cls)
        gt_classes = segment_classes_from_map(inst, cls)
        for init in init_levels:
            cfg = replace(cascade, init_level=init)
            times = []
            result = None
            for _ in range(repeats):
                result = run_pipeline(pyramid, scores, things, cfg, solver,
                                      min_area=min_area, threads=threads)
                times.append(result.total_seconds)
            _, ap = average_precision(result.instances, gt_set)
            pred_labels, pred_classes = labels_from_instances(result.instances)
            pq = panoptic_quality(pred_labels, pred_classes, inst,
                                  gt_classes, things).pq
            report.rows.append({
                "scene": si,
                "init_level": init,
                "seconds": float(np.median(times)),
                "ap": ap,
                "pq": pq,
                "levels": [
                    {"level": row["level"], "nodes": row["nodes"],
                     "edges": row["edges"], "pixel_nodes": row["pixel_nodes"],
                     "seconds": row["seconds"]}
                    for row in result.timing
                ],
            })
    return report


def labels_from_instances(instances: InstanceSet):
    """Paint an InstanceSet back to a label grid plus id -> class map."""
    grid = np.zeros((instances.height, instances.width), dtype=np.uint32)
    classes = {}
    for k, inst in enumerate(instances, start=1):
        grid.ravel()[inst.pixels] = k
        classes[k] = inst.class_id
    return PyramidLevelGrid(0, INSTANCE_IDS, grid), classes

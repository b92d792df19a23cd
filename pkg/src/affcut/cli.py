"""Command-line interface.

Subcommands: synth, gt-affinity, perturb, segment, evaluate, bench,
render. Global flags --seed, --threads, and --config (a JSON file whose
sections mirror the config dataclasses; explicit flags override file
values, which override defaults).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from .affinity import AffinityMap, gt_affinity_pyramid
from .bench import bench_cascade, labels_from_instances, run_pipeline
from .cascade import CascadeConfig
from .grid_io import (CLASS_IDS, CLASS_SCORES, INSTANCE_IDS, Pyramid,
                      PyramidLevelGrid, read_tensor, render_labels, write_tensor)
from .metrics import (average_precision, instances_from_maps, panoptic_quality,
                      segment_classes_from_map)
from .partition import SolverConfig
from .refine import instance_set_from_dict, instance_set_to_dict
from .rng import derive
from .synth import (ALL_SHAPES, NoiseSpec, SceneSpec, generate_scene,
                    perturb_affinity, perturb_scores, scores_from_class_map)


def _load_config(path):
    if not path:
        return {}
    with open(path) as f:
        return json.load(f)


def _merge(cls, section: dict, **flags):
    """Dataclass from defaults <- config file section <- explicit flags."""
    merged = dict(section)
    for k, v in flags.items():
        if v is not None:
            merged[k] = v
    return cls(**merged)


def _value(flag, cfg: dict, key: str, default):
    if flag is not None:
        return flag
    return cfg.get(key, default)


def _parse_things(text) -> set:
    return {int(t) for t in str(text).split(",") if t != ""}


def _bool_flag(text):
    if text is None:
        return None
    if str(text).lower() in ("1", "true", "on", "yes"):
        return True
    if str(text).lower() in ("0", "false", "off", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _write_json(path, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path:
        with open(path, "w") as f:
            f.write(text + "\n")
    else:
        print(text)


def _write_affinity_dir(out_dir, pyramid: Pyramid) -> None:
    import os
    os.makedirs(out_dir, exist_ok=True)
    for m in pyramid.levels:
        write_tensor(f"{out_dir}/aff_l{m.level}.afpy", m.values)
        write_tensor(f"{out_dir}/valid_l{m.level}.afpy",
                     m.valid.astype(np.uint32))


def _read_affinity_dir(in_dir) -> Pyramid:
    import os
    maps = []
    level = 0
    while os.path.exists(f"{in_dir}/aff_l{level}.afpy"):
        values = read_tensor(f"{in_dir}/aff_l{level}.afpy")
        valid = read_tensor(f"{in_dir}/valid_l{level}.afpy").astype(bool)
        r = int(round(values.shape[0] ** 0.5))
        maps.append(AffinityMap(level=level, r=r, values=values, valid=valid))
        level += 1
    if not maps:
        raise FileNotFoundError(f"no aff_l0.afpy under {in_dir}")
    return Pyramid(maps, maps[0].height, maps[0].width)


def _cmd_synth(args, cfg):
    scene = _merge(
        SceneSpec, cfg.get("scene", {}),
        base_height=args.height, base_width=args.width,
        num_instances=args.instances,
        shape_kinds=tuple(args.shapes.split(",")) if args.shapes else None,
        class_count=args.classes, occlusion=_bool_flag(args.occlusion),
        rng_seed=args.seed, min_size_frac=args.min_size_frac,
        max_size_frac=args.max_size_frac,
        max_fragment_gap=args.max_fragment_gap)
    inst, cls = generate_scene(scene)
    write_tensor(args.out_instances, inst.data)
    write_tensor(args.out_classes, cls.data)
    if args.out_scores:
        conf = _value(args.confidence, cfg, "confidence", 0.9)
        scores = scores_from_class_map(cls.data, scene.class_count, conf)
        write_tensor(args.out_scores, scores.data)


def _cmd_gt_affinity(args, cfg):
    inst = PyramidLevelGrid(0, INSTANCE_IDS, read_tensor(args.instances))
    levels = _value(args.levels, cfg, "levels", 5)
    r = _value(args.r, cfg, "window_r", 5)
    pyramid = gt_affinity_pyramid(inst, levels, r)
    _write_affinity_dir(args.out_dir, pyramid)


def _cmd_perturb(args, cfg):
    noise = _merge(NoiseSpec, cfg.get("noise", {}),
                   flip_prob=args.flip_prob,
                   logistic_sigma=args.logistic_sigma,
                   semantic_corrupt_prob=args.semantic_corrupt_prob,
                   rng_seed=args.seed)
    pyramid = _read_affinity_dir(args.in_dir)
    maps = [perturb_affinity(m, replace(noise, rng_seed=derive(noise.rng_seed, m.level)))
            for m in pyramid.levels]
    _write_affinity_dir(args.out_dir, Pyramid(maps, pyramid.base_height,
                                              pyramid.base_width))
    if args.scores:
        scores = PyramidLevelGrid(0, CLASS_SCORES, read_tensor(args.scores))
        out = perturb_scores(scores, noise)
        write_tensor(args.out_scores, out.data)


def _cmd_segment(args, cfg):
    pyramid = _read_affinity_dir(args.affinity_dir)
    scores = PyramidLevelGrid(0, CLASS_SCORES, read_tensor(args.class_scores))
    things = _parse_things(args.thing_classes if args.thing_classes is not None
                           else ",".join(str(t) for t in cfg.get("thing_classes", [1])))
    cascade = _merge(CascadeConfig, cfg.get("cascade", {}),
                     init_level=args.init_level,
                     erosion_radius=args.erosion_radius,
                     min_proposal_area=args.min_proposal_area,
                     per_class=_bool_flag(args.per_class))
    solver = _merge(SolverConfig, cfg.get("solver", {}),
                    use_local_search=_bool_flag(args.local_search),
                    max_ls_sweeps=args.max_ls_sweeps,
                    rng_seed=args.seed)
    min_area = _value(args.min_area, cfg, "min_area", 0)
    result = run_pipeline(pyramid, scores, things, cascade, solver,
                          min_area=min_area, threads=args.threads or 1)
    write_tensor(args.out_labels, result.labels.data)
    if args.out_instances:
        _write_json(args.out_instances, instance_set_to_dict(result.instances))
    if args.timing_out:
        rows = [{k: row[k] for k in ("level", "nodes", "edges", "seconds")}
                for row in result.timing]
        _write_json(args.timing_out, {"levels": rows})


def _cmd_evaluate(args, cfg):
    with open(args.pred_instances) as f:
        pred = instance_set_from_dict(json.load(f))
    gt_inst = PyramidLevelGrid(0, INSTANCE_IDS, read_tensor(args.gt_instances))
    gt_cls = PyramidLevelGrid(0, CLASS_IDS, read_tensor(args.gt_classes))
    things = _parse_things(args.thing_classes if args.thing_classes is not None
                           else ",".join(str(t) for t in cfg.get("thing_classes", [1])))
    gt_set = instances_from_maps(gt_inst, gt_cls)
    per_class, mean_ap = average_precision(pred, gt_set)
    pred_labels, pred_classes = labels_from_instances(pred)
    pq = panoptic_quality(pred_labels, pred_classes, gt_inst,
                          segment_classes_from_map(gt_inst, gt_cls), things)
    _write_json(args.out, {
        "AP": mean_ap,
        "AP_per_class": {str(c): v for c, v in per_class.items()},
        "PQ": pq.pq, "SQ": pq.sq, "RQ": pq.rq, "PQ_things": pq.pq_things,
    })


def _cmd_bench(args, cfg):
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    scene_base = _merge(
        SceneSpec, cfg.get("scene", {}),
        base_height=args.height, base_width=args.width,
        num_instances=args.instances, class_count=args.classes,
        min_size_frac=args.min_size_frac, max_size_frac=args.max_size_frac)
    specs = [replace(scene_base, rng_seed=derive(seed, i))
             for i in range(args.scenes)]
    noise = None
    if args.flip_prob or args.logistic_sigma or args.semantic_corrupt_prob:
        noise = NoiseSpec(flip_prob=args.flip_prob or 0.0,
                          logistic_sigma=args.logistic_sigma or 0.0,
                          semantic_corrupt_prob=args.semantic_corrupt_prob or 0.0,
                          rng_seed=derive(seed, 0xB))
    init_levels = [int(t) for t in args.init_levels.split(",")]
    cascade = _merge(CascadeConfig, cfg.get("cascade", {}))
    solver = _merge(SolverConfig, cfg.get("solver", {}))
    report = bench_cascade(
        specs, noise, init_levels, repeats=args.repeats,
        levels=_value(args.levels, cfg, "levels", 5),
        r=_value(args.r, cfg, "window_r", 5),
        confidence=_value(args.confidence, cfg, "confidence", 0.9),
        cascade=cascade, solver=solver,
        min_area=_value(args.min_area, cfg, "min_area", 0),
        threads=args.threads or 1)
    print(report.to_text())
    if args.out:
        _write_json(args.out, {"rows": report.rows})


def _cmd_render(args, cfg):
    labels = PyramidLevelGrid(0, INSTANCE_IDS, read_tensor(args.labels))
    seed = args.palette_seed
    if seed is None:
        seed = cfg.get("palette_seed", args.seed if args.seed is not None else 0)
    ppm = render_labels(labels, seed)
    with open(args.out, "wb") as f:
        f.write(ppm)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="affcut",
        description="Affinity-pyramid instance segmentation via cascaded "
                    "multicut graph partition")
    ap.add_argument("--seed", type=int, default=None, help="global RNG seed")
    ap.add_argument("--threads", type=int, default=None,
                    help="worker threads for per-class solves")
    ap.add_argument("--config", default=None,
                    help="JSON config file; flags override its values")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled scene")
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--instances", type=int)
    p.add_argument("--shapes", help=f"comma list from {ALL_SHAPES}")
    p.add_argument("--classes", type=int, help="class count incl. background")
    p.add_argument("--occlusion", help="on/off")
    p.add_argument("--min-size-frac", type=float)
    p.add_argument("--max-size-frac", type=float)
    p.add_argument("--max-fragment-gap", type=int)
    p.add_argument("--confidence", type=float)
    p.add_argument("--out-instances", required=True)
    p.add_argument("--out-classes", required=True)
    p.add_argument("--out-scores")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("gt-affinity", help="ground-truth affinity pyramid")
    p.add_argument("--instances", required=True)
    p.add_argument("--levels", type=int)
    p.add_argument("--r", type=int)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_gt_affinity)

    p = sub.add_parser("perturb", help="simulate imperfect predictions")
    p.add_argument("--in-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--flip-prob", type=float)
    p.add_argument("--logistic-sigma", type=float)
    p.add_argument("--semantic-corrupt-prob", type=float)
    p.add_argument("--scores")
    p.add_argument("--out-scores")
    p.set_defaults(func=_cmd_perturb)

    p = sub.add_parser("segment", help="cascaded partition to instances")
    p.add_argument("--affinity-dir", required=True)
    p.add_argument("--class-scores", required=True)
    p.add_argument("--thing-classes")
    p.add_argument("--init-level", type=int)
    p.add_argument("--erosion-radius", type=int)
    p.add_argument("--min-proposal-area", type=int)
    p.add_argument("--per-class", help="on/off")
    p.add_argument("--local-search", help="on/off")
    p.add_argument("--max-ls-sweeps", type=int)
    p.add_argument("--min-area", type=int)
    p.add_argument("--out-labels", required=True)
    p.add_argument("--out-instances")
    p.add_argument("--timing-out")
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("evaluate", help="AP and PQ against ground truth")
    p.add_argument("--pred-instances", required=True)
    p.add_argument("--gt-instances", required=True)
    p.add_argument("--gt-classes", required=True)
    p.add_argument("--thing-classes")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("bench", help="cascaded-vs-flat benchmark")
    p.add_argument("--scenes", type=int, default=5)
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--instances", type=int)
    p.add_argument("--classes", type=int)
    p.add_argument("--min-size-frac", type=float)
    p.add_argument("--max-size-frac", type=float)
    p.add_argument("--init-levels", default="0,2")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--levels", type=int)
    p.add_argument("--r", type=int)
    p.add_argument("--confidence", type=float)
    p.add_argument("--flip-prob", type=float)
    p.add_argument("--logistic-sigma", type=float)
    p.add_argument("--semantic-corrupt-prob", type=float)
    p.add_argument("--min-area", type=int)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("render", help="instance ids to a PPM image")
    p.add_argument("--labels", required=True)
    p.add_argument("--palette-seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_render)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = _load_config(args.config)
    if args.seed is None and "seed" in cfg:
        args.seed = cfg["seed"]
    if args.threads is None and "threads" in cfg:
        args.threads = cfg["threads"]
    args.func(args, cfg)
    return 0


if __name__ == "__main__":
    sys.exit(main())

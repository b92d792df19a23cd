"""Run the pipeline on degraded inputs and watch AP and PQ respond.

Ground-truth affinities are flipped with increasing probability and blurred
in logit space; class scores are corrupted at random pixels. The metrics
degrade smoothly, which is what makes the synthetic setting useful for
exercising the evaluation stack without a network.
"""

import numpy as np

import affcut as ac
from affcut.rng import derive

spec = ac.SceneSpec(base_height=96, base_width=96, num_instances=4,
                    class_count=4, occlusion=True, rng_seed=808)
inst, cls = ac.generate_scene(spec)
pyramid = ac.gt_affinity_pyramid(inst, levels=4, r=5)
scores = ac.scores_from_class_map(cls.data, 4, confidence=0.9)
things = {1, 2, 3}
gt_set = ac.instances_from_maps(inst, cls)
gt_classes = ac.segment_classes_from_map(inst, cls)

print(f"{'flip':>6} {'sigma':>6} {'corrupt':>8} {'AP':>7} {'PQ':>7} {'SQ':>7} {'RQ':>7} {'#inst':>6}")
for flip, sigma, corrupt in [(0.0, 0.0, 0.0), (0.02, 0.5, 0.0),
                             (0.05, 1.0, 0.05), (0.10, 1.5, 0.10),
                             (0.20, 2.0, 0.20)]:
    noise = ac.NoiseSpec(flip_prob=flip, logistic_sigma=sigma,
                         semantic_corrupt_prob=corrupt, rng_seed=derive(5, 1))
    noisy_maps = [ac.perturb_affinity(m, ac.NoiseSpec(
        flip_prob=flip, logistic_sigma=sigma, rng_seed=derive(noise.rng_seed, m.level)))
        for m in pyramid.levels]
    noisy_pyr = ac.Pyramid(noisy_maps, pyramid.base_height, pyramid.base_width)
    noisy_scores = ac.perturb_scores(scores, noise) if corrupt else scores

    res = ac.run_pipeline(noisy_pyr, noisy_scores, things,
                          ac.CascadeConfig(init_level=2), ac.SolverConfig(),
                          min_area=4)
    _, ap = ac.average_precision(res.instances, gt_set)
    pl, pc = ac.labels_from_instances(res.instances)
    pq = ac.panoptic_quality(pl, pc, inst, gt_classes, things)
    print(f"{flip:>6.2f} {sigma:>6.1f} {corrupt:>8.2f} "
          f"{ap:>7.3f} {pq.pq:>7.3f} {pq.sq:>7.3f} {pq.rq:>7.3f} "
          f"{len(res.instances):>6}")

print("\nnoise-free inputs recover the scene exactly; moderate noise mostly "
      "costs boundary IoU (SQ), heavy noise starts splitting and dropping "
      "instances (RQ).")

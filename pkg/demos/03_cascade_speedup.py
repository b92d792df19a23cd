"""Why the cascade is fast: coarse partitions turn instance interiors into
single super-nodes before the expensive fine-level solve ever runs.

Compares a flat finest-level partition against cascaded initialization on
scenes dominated by large instances, printing the per-level node counts
and the wall-clock partition time of each configuration.
"""

import numpy as np

import affcut as ac
from affcut.rng import derive

specs = [ac.SceneSpec(base_height=256, base_width=256, num_instances=4,
                      class_count=4, occlusion=True, rng_seed=derive(31337, k),
                      min_size_frac=0.25, max_size_frac=0.5)
         for k in range(5)]

report = ac.bench_cascade(specs, None, init_levels=[0, 1, 2, 3],
                          repeats=3, levels=5, r=5, confidence=0.9)
print(report.to_text())

by_init = {}
for row in report.rows:
    by_init.setdefault(row["init_level"], []).append(row["seconds"])
print("\nmedian partition seconds by initial level:")
base = np.median(by_init[0])
for init, times in sorted(by_init.items()):
    med = float(np.median(times))
    print(f"  init {init}: {med:.3f}s  ({base / med:.1f}x vs flat)")

row = next(r for r in report.rows if r["init_level"] == 2)
print("\nnode-count reduction with init level 2 (scene 0):")
for s in row["levels"]:
    print(f"  level {s['level']}: {s['pixel_nodes']} pixel nodes "
          f"-> {s['nodes']} after contraction "
          f"({s['edges']} edges, {s['seconds'] * 1e3:.0f} ms)")
print("\nquality is identical in every row: the contracted objective equals "
      "the pixel objective exactly, so nothing is traded for the speedup.")

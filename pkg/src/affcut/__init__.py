"""Instance segmentation from pixel-pair affinity pyramids.

The package covers the full post-network pipeline: synthetic scene and
affinity generation, graph construction, cascaded multicut partitioning
with an exact small-graph oracle, semantic refinement, instance
post-processing, and AP/PQ evaluation.
"""

from .affinity import (AffinityMap, LossConfig, WindowGeometry, affinity_loss,
                       gt_affinity_map, gt_affinity_pyramid, subsample)
from .bench import (BenchReport, PipelineResult, bench_cascade,
                    labels_from_instances, run_pipeline)
from .cascade import (CascadeConfig, Proposal, contract_with_proposals,
                      proposals_from_partition, run_cascade)
from .grid_io import (CLASS_IDS, CLASS_SCORES, INSTANCE_IDS, Pyramid,
                      PyramidLevelGrid, TensorFormatError, label_colors,
                      level_shape, read_tensor, render_labels, write_tensor)
from .metrics import (MatchResult, PQResult, average_precision,
                      instances_from_maps, iou, match_segments,
                      panoptic_quality, segment_classes_from_map)
from .partition import (ALPHA_EPS, W_MAX, Partition, PartitionGraph,
                        SolverConfig, build_graph, logit_weight,
                        multicut_objective, solve_exact, solve_greedy_contract)
from .refine import (Instance, InstanceSet, final_partition,
                     instance_set_from_dict, instance_set_to_dict,
                     js_divergence, postprocess, refine_affinity, rle_decode,
                     rle_encode)
from .synth import (NoiseSpec, SceneSpec, SceneTooCrowdedError, generate_scene,
                    perturb_affinity, perturb_scores, scores_from_class_map,
                    scores_from_classes)

__version__ = "0.1.0"

import numpy as np
import pytest

from affcut.affinity import AffinityMap, gt_affinity_map
from affcut.partition import (W_MAX, Partition, PartitionGraph,
                              SolverConfig, build_graph, logit_weight,
                              multicut_objective, solve_exact,
                              solve_greedy_contract)

from _util import brute_objective, enumerate_partitions


def _triangle(w12, w13, w23):
    return PartitionGraph.from_edges(3, [(0, 1, w12), (0, 2, w13), (1, 2, w23)])


def test_from_edges_rejects_bad_graphs():
    with pytest.raises(ValueError):
        PartitionGraph.from_edges(2, [(0, 0, 1.0)])
    with pytest.raises(ValueError):
        PartitionGraph.from_edges(2, [(0, 1, 1.0), (1, 0, 2.0)])


def test_logit_weight_values():
    assert logit_weight(np.array([0.5]))[0] == 0.0
    w = logit_weight(np.array([0.7]))[0]
    assert abs(w - np.log(0.7 / 0.3)) < 1e-12
    # the 1 - alpha rounding at the clamp costs ~3e-11, always inside W_MAX
    assert abs(logit_weight(np.array([0.0]))[0] + W_MAX) < 1e-9
    assert abs(logit_weight(np.array([1.0]))[0] - W_MAX) < 1e-9
    assert abs(logit_weight(np.array([1.0]))[0]) <= W_MAX
    # strictly monotone
    a = np.linspace(0.01, 0.99, 50)
    assert (np.diff(logit_weight(a)) > 0).all()


def _two_pixel_map(a_uv, a_vu, valid_uv=True, valid_vu=True):
    """1x2 image, r=3: the only pair is (0,0)-(0,1) via offset (0, 1)."""
    values = np.zeros((9, 1, 2), dtype=np.float32)
    valid = np.zeros((9, 1, 2), dtype=bool)
    valid[4] = True
    values[4] = 1.0
    # channel 5 is offset (0, +1) at pixel u; channel 3 is (0, -1) at v
    valid[5, 0, 0] = valid_uv
    values[5, 0, 0] = a_uv if valid_uv else 0.0
    valid[3, 0, 1] = valid_vu
    values[3, 0, 1] = a_vu if valid_vu else 0.0
    return AffinityMap(level=0, r=3, values=values, valid=valid)


def test_build_graph_averages_directions():
    aff = _two_pixel_map(0.6, 0.8)
    g = build_graph(aff, np.ones((1, 2), dtype=bool))
    assert g.node_count == 2 and g.edge_count == 1
    # affinities are stored float32, so compare at that resolution
    assert abs(g.ew[0] - np.log(0.7 / 0.3)) < 1e-6


def test_build_graph_single_direction():
    aff = _two_pixel_map(0.6, 0.0, valid_vu=False)
    g = build_graph(aff, np.ones((1, 2), dtype=bool))
    assert abs(g.ew[0] - np.log(0.6 / 0.4)) < 1e-6
    aff = _two_pixel_map(0.0, 0.8, valid_uv=False)
    g = build_graph(aff, np.ones((1, 2), dtype=bool))
    assert abs(g.ew[0] - np.log(0.8 / 0.2)) < 1e-6
    # both directions invalid: no edge
    aff = _two_pixel_map(0.0, 0.0, valid_uv=False, valid_vu=False)
    g = build_graph(aff, np.ones((1, 2), dtype=bool))
    assert g.edge_count == 0


def test_build_graph_alpha_half_is_zero_weight():
    aff = _two_pixel_map(0.5, 0.5)
    g = build_graph(aff, np.ones((1, 2), dtype=bool))
    assert g.ew[0] == 0.0


def test_build_graph_binary_map_saturates():
    rng = np.random.default_rng(3)
    ids = rng.integers(0, 3, size=(9, 9)).astype(np.uint32)
    aff = gt_affinity_map(ids, r=3)
    g = build_graph(aff, np.ones_like(ids, dtype=bool))
    g.validate()
    assert (np.abs(np.abs(g.ew) - W_MAX) < 1e-9).all()
    assert g.edge_count <= g.node_count * 4  # (r*r - 1) / 2


def test_build_graph_respects_mask_and_payload():
    ids = np.ones((4, 4), dtype=np.uint32)
    aff = gt_affinity_map(ids, r=3)
    mask = np.zeros((4, 4), dtype=bool)
    mask[0, :2] = True
    g = build_graph(aff, mask)
    assert g.node_count == 2
    assert [p.tolist() for p in g.node_payload] == [[0], [1]]
    assert g.edge_count == 1


def test_objective_examples():
    g = _triangle(1.0, 1.0, -0.5)
    assert multicut_objective(g, Partition(np.array([0, 0, 0]))) == 0.0
    assert multicut_objective(g, Partition(np.array([0, 1, 2]))) == 1.5
    g2 = _triangle(1.0, -2.0, 0.5)
    assert multicut_objective(g2, Partition(np.array([0, 0, 1]))) == -1.5
    with pytest.raises(ValueError):
        multicut_objective(g, Partition(np.array([0, 0])))
    with pytest.raises(ValueError):
        multicut_objective(g, Partition(np.array([0, 0, 5])))


def test_solve_exact_triangles():
    p = solve_exact(_triangle(1.0, 1.0, -0.5))
    assert p.labels.tolist() == [0, 0, 0]
    g2 = _triangle(1.0, -2.0, 0.5)
    p2 = solve_exact(g2)
    assert p2.labels.tolist() == [0, 0, 1]
    assert multicut_objective(g2, p2) == -1.5


def test_solve_exact_all_positive_single_segment():
    rng = np.random.default_rng(6)
    edges = [(u, v, float(rng.uniform(0.1, 1)))
             for u in range(6) for v in range(u + 1, 6)]
    p = solve_exact(PartitionGraph.from_edges(6, edges))
    assert p.num_segments == 1


def test_solve_exact_tie_prefers_fewer_segments():
    # all-zero weights: every partition ties at 0; want the single segment
    g = _triangle(0.0, 0.0, 0.0)
    assert solve_exact(g).labels.tolist() == [0, 0, 0]


def test_solve_exact_matches_independent_enumeration():
    rng = np.random.default_rng(17)
    for _ in range(25):
        n = int(rng.integers(2, 7))
        edges = [(u, v, float(rng.uniform(-1, 1)))
                 for u in range(n) for v in range(u + 1, n)
                 if rng.random() < 0.8]
        g = PartitionGraph.from_edges(n, edges)
        best = min(brute_objective(edges, labels)
                   for labels in enumerate_partitions(n))
        got = multicut_objective(g, solve_exact(g))
        assert abs(got - best) < 1e-12


def test_solve_exact_node_cap():
    g = PartitionGraph.from_edges(13, [(0, 1, 1.0)])
    with pytest.raises(ValueError):
        solve_exact(g)


def test_greedy_all_negative_stays_singleton():
    rng = np.random.default_rng(9)
    edges = [(u, v, float(rng.uniform(-1, -0.1)))
             for u in range(6) for v in range(u + 1, 6)]
    g = PartitionGraph.from_edges(6, edges)
    p = solve_greedy_contract(g, SolverConfig())
    assert p.num_segments == 6


def test_greedy_chain_example():
    g = PartitionGraph.from_edges(3, [(0, 1, 2.0), (1, 2, -1.0)])
    p = solve_greedy_contract(g, SolverConfig())
    assert p.labels[0] == p.labels[1] != p.labels[2]
    assert multicut_objective(g, p) == -1.0


def test_greedy_never_below_exact_and_mostly_optimal():
    rng = np.random.default_rng(1234)
    match = 0
    total = 200
    for _ in range(total):
        n = int(rng.integers(2, 9))
        edges = [(u, v, float(rng.uniform(-1, 1)))
                 for u in range(n) for v in range(u + 1, n)]
        g = PartitionGraph.from_edges(n, edges)
        oe = multicut_objective(g, solve_exact(g))
        og = multicut_objective(g, solve_greedy_contract(g, SolverConfig()))
        assert og >= oe - 1e-9
        if abs(og - oe) <= 1e-9:
            match += 1
    assert match / total >= 0.9


def test_greedy_upper_bounds():
    rng = np.random.default_rng(55)
    for _ in range(30):
        n = int(rng.integers(2, 12))
        edges = [(u, v, float(rng.uniform(-1, 1)))
                 for u in range(n) for v in range(u + 1, n)
                 if rng.random() < 0.7]
        g = PartitionGraph.from_edges(n, edges)
        obj = multicut_objective(g, solve_greedy_contract(g, SolverConfig()))
        singleton = multicut_objective(g, Partition(np.arange(n)))
        assert obj <= 0.0 + 1e-12          # no-cut baseline
        assert obj <= singleton + 1e-12    # all-singleton baseline


def test_greedy_deterministic():
    rng = np.random.default_rng(77)
    n = 30
    edges = [(u, v, float(rng.uniform(-1, 1)))
             for u in range(n) for v in range(u + 1, n) if rng.random() < 0.3]
    g = PartitionGraph.from_edges(n, edges)
    a = solve_greedy_contract(g, SolverConfig(rng_seed=1))
    b = solve_greedy_contract(g, SolverConfig(rng_seed=2))
    assert (a.labels == b.labels).all()


def test_local_search_improves_over_pure_gaec():
    # negative-heavy graph where a node move after contraction pays off
    g = PartitionGraph.from_edges(4, [
        (0, 1, 1.0), (1, 2, 0.9), (2, 3, 1.0), (0, 3, -2.5), (0, 2, -0.8)])
    with_ls = solve_greedy_contract(g, SolverConfig(use_local_search=True))
    without = solve_greedy_contract(g, SolverConfig(use_local_search=False))
    assert multicut_objective(g, with_ls) <= multicut_objective(g, without)
    assert multicut_objective(g, with_ls) == multicut_objective(g, solve_exact(g))


def test_empty_graph():
    g = PartitionGraph.from_edges(0, [])
    assert solve_exact(g).labels.size == 0
    assert solve_greedy_contract(g, SolverConfig()).labels.size == 0

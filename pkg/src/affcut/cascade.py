"""Coarse-to-fine cascade: partition at a coarse level, promote the
reliable inner regions of each segment as atomic super-nodes one level
finer, contract, and re-partition.

Contraction sums all pixel-pair weights between super-node payloads, so
the contracted objective of any partition equals the pixel objective of
the induced pixel partition exactly; the cascade trades nothing but the
freedom to split a proposal.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .affinity import subsample
from .grid_io import CLASS_SCORES, INSTANCE_IDS, PyramidLevelGrid, Pyramid
from .partition import (Partition, PartitionGraph, SolverConfig, build_graph,
                        solve_greedy_contract)

_FOUR_CONN = ndimage.generate_binary_structure(2, 1)


@dataclass
class CascadeConfig:
    init_level: int = 2
    erosion_radius: int = 2       # in finer-level pixels
    min_proposal_area: int = 4    # eroded fragments below this fall back to singletons
    per_class: bool = True

    def __post_init__(self):
        if self.init_level < 0:
            raise ValueError("init_level must be >= 0")
        if self.erosion_radius < 0:
            raise ValueError("erosion_radius must be >= 0")
        if self.min_proposal_area < 1:
            raise ValueError("min_proposal_area must be >= 1")


@dataclass
class Proposal:
    """One segment's surviving inner region at the target level."""

    segment_id: int
    pixels: np.ndarray          # sorted linear indices at the target level
    class_id: int | None = None


def proposals_from_partition(labels: np.ndarray, target_shape: tuple,
                             cfg: CascadeConfig) -> list:
    """Promote a level-l label grid to proposals at level l-1.

    Each segment is upsampled x2 (nearest), eroded with a square element
    of side 2 * erosion_radius + 1 against all other labels, the
    background, and the image border, and connected fragments below
    min_proposal_area are dropped. Surviving pixels of one segment form
    one proposal, disconnected or not.
    """
    th, tw = target_shape
    up = np.repeat(np.repeat(labels, 2, axis=0), 2, axis=1)[:th, :tw]
    side = 2 * cfg.erosion_radius + 1
    structure = np.ones((side, side), dtype=bool)
    out = []
    for seg in np.unique(up):
        if seg == 0:
            continue
        mask = up == seg
        if cfg.erosion_radius > 0:
            mask = ndimage.binary_erosion(mask, structure=structure, border_value=0)
        if not mask.any():
            continue
        if cfg.min_proposal_area > 1:
            comps, _ = ndimage.label(mask, structure=_FOUR_CONN)
            sizes = np.bincount(comps.ravel())
            mask &= sizes[comps] >= cfg.min_proposal_area
            if not mask.any():
                continue
        out.append(Proposal(segment_id=int(seg),
                            pixels=np.flatnonzero(mask.ravel())))
    return out


def contract_with_proposals(g_pixels: PartitionGraph, proposals: list) -> PartitionGraph:
    """Collapse each proposal into one super-node, summing parallel edges.

    Proposals must reference pixels that are nodes of g_pixels and must
    not overlap. Remaining pixels stay singleton nodes; intra-proposal
    edges vanish.
    """
    n = g_pixels.node_count
    pixel_to_node = {}
    for i, payload in enumerate(g_pixels.node_payload):
        for pix in payload.tolist():
            pixel_to_node[pix] = i
    group = np.full(n, -1, dtype=np.int64)
    for k, prop in enumerate(proposals):
        for pix in np.asarray(prop.pixels).tolist():
            node = pixel_to_node.get(int(pix))
            if node is None:
                raise ValueError(
                    f"proposal {prop.segment_id} references pixel {pix} "
                    "outside the graph")
            if group[node] != -1:
                raise ValueError(f"proposals overlap at pixel {pix}")
            group[node] = k
    p = len(proposals)
    free = group == -1
    group[free] = p + np.arange(int(free.sum()), dtype=np.int64)
    new_count = p + int(free.sum())

    payload = [np.sort(np.asarray(prop.pixels, dtype=np.int64))
               for prop in proposals]
    payload.extend(g_pixels.node_payload[i] for i in np.flatnonzero(free))

    a = group[g_pixels.eu]
    b = group[g_pixels.ev]
    keep = a != b
    a, b, w = a[keep], b[keep], g_pixels.ew[keep]
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    keys = lo * np.int64(new_count) + hi
    uniq, inverse = np.unique(keys, return_inverse=True)
    ew = np.bincount(inverse, weights=w, minlength=len(uniq))
    eu = (uniq // new_count).astype(np.int64)
    ev = (uniq % new_count).astype(np.int64)
    return PartitionGraph(new_count, eu, ev, ew,
                          node_payload=payload, grid_shape=g_pixels.grid_shape)


def segment_pixel_sets(g: PartitionGraph, part: Partition) -> list:
    """Pixel set per segment, ordered by segment id."""
    out = [[] for _ in range(part.num_segments)]
    for node, seg in enumerate(part.labels.tolist()):
        out[seg].append(g.node_payload[node])
    return [np.sort(np.concatenate(chunks)) for chunks in out]


def class_maps_per_level(class_scores: PyramidLevelGrid, depth: int) -> list:
    """Per-level argmax class maps: level-0 argmax, then stride-2 samples."""
    if class_scores.kind != CLASS_SCORES:
        raise ValueError("expected a class_scores grid")
    cm = class_scores.data.argmax(axis=0).astype(np.int64)
    maps = [cm]
    for _ in range(1, depth):
        maps.append(subsample(maps[-1]))
    return maps


def _solve_jobs(jobs: list, solver: SolverConfig, threads: int) -> list:
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(solve_greedy_contract, g, solver) for g in jobs]
            return [f.result() for f in futures]
    return [solve_greedy_contract(g, solver) for g in jobs]


def run_cascade(affinity_pyramid: Pyramid, class_scores: PyramidLevelGrid,
                thing_classes: set, cfg: CascadeConfig, solver: SolverConfig,
                threads: int = 1):
    """Partition levels init_level .. 1, promoting proposals downward.

    Returns (labels, seg_class, report): the level-1 instance grid (None
    when init_level is 0, meaning a flat final partition), the segment id
    to class map, and one timing row per level with node/edge counts
    after contraction.
    """
    depth = len(affinity_pyramid)
    if not 0 <= cfg.init_level < depth:
        raise ValueError(f"init_level {cfg.init_level} outside pyramid depth {depth}")
    report: list = []
    if cfg.init_level == 0:
        return None, {}, report

    cmaps = class_maps_per_level(class_scores, depth)
    things = sorted(int(c) for c in thing_classes)
    labels_grid = None
    seg_class: dict = {}

    for level in range(cfg.init_level, 0, -1):
        t0 = time.perf_counter()
        aff = affinity_pyramid[level]
        cm = cmaps[level]
        shape = (aff.height, aff.width)

        props: list = []
        if labels_grid is not None:
            props = proposals_from_partition(labels_grid, shape, cfg)
            for prop in props:
                prop.class_id = seg_class.get(prop.segment_id)

        jobs = []
        job_meta = []
        pixel_nodes = 0
        for c in (things if cfg.per_class else [None]):
            mask = np.isin(cm, things) if c is None else cm == c
            if not mask.any():
                continue
            g = build_graph(aff, mask)
            pixel_nodes += g.node_count
            mine = [p for p in props if c is None or p.class_id == c]
            trimmed = []
            for p in mine:
                pix = p.pixels[mask.ravel()[p.pixels]]
                if len(pix):
                    trimmed.append(Proposal(p.segment_id, pix, p.class_id))
            if trimmed:
                g = contract_with_proposals(g, trimmed)
            jobs.append(g)
            job_meta.append(c)
        parts = _solve_jobs(jobs, solver, threads)

        new_labels = np.zeros(shape, dtype=np.uint32)
        new_seg_class = {}
        nid = 0
        nodes = edges = 0
        for c, g, part in zip(job_meta, jobs, parts):
            nodes += g.node_count
            edges += g.edge_count
            for pixels in segment_pixel_sets(g, part):
                nid += 1
                new_labels.ravel()[pixels] = nid
                new_seg_class[nid] = c
        labels_grid = new_labels
        seg_class = new_seg_class
        report.append({"level": level, "nodes": nodes, "edges": edges,
                       "seconds": time.perf_counter() - t0,
                       "pixel_nodes": pixel_nodes})

    labels = PyramidLevelGrid(1, INSTANCE_IDS, labels_grid)
    return labels, seg_class, report

"""Weighted partition graphs and multicut solvers.

A graph is built from an affinity map by averaging the two directed
affinities of each in-window pixel pair and mapping the average through
the logit, so pairs more likely than not to be together get positive
edges. Partitioning minimizes the total weight of cut edges; feasibility
(cycle consistency) holds by construction because solutions are node
labelings.

Solvers:
  solve_exact           enumeration over all partitions, small graphs only
  solve_greedy_contract greedy additive edge contraction plus a
                        single-node-move / segment-merge local search
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .affinity import AffinityMap

ALPHA_EPS = 1e-6
W_MAX = float(np.log((1.0 - ALPHA_EPS) / ALPHA_EPS))  # ~13.8155, the weight clamp

EXACT_NODE_CAP = 12  # Bell-number enumeration beyond this is unreasonable

_STRICT = 1e-12  # local-search moves must beat this margin


@dataclass
class PartitionGraph:
    """Undirected weighted graph over pixels or super-nodes.

    Edges are stored as parallel arrays with eu < ev and at most one edge
    per pair. node_payload[i] is the sorted array of grid pixels (linear
    indices) node i represents; singletons for pixel nodes.
    """

    node_count: int
    eu: np.ndarray
    ev: np.ndarray
    ew: np.ndarray
    node_payload: list = field(default_factory=list)
    grid_shape: tuple | None = None

    def __post_init__(self):
        self.eu = np.asarray(self.eu, dtype=np.int64)
        self.ev = np.asarray(self.ev, dtype=np.int64)
        self.ew = np.asarray(self.ew, dtype=np.float64)
        if not self.node_payload:
            self.node_payload = [np.array([i], dtype=np.int64)
                                 for i in range(self.node_count)]

    @property
    def edge_count(self) -> int:
        return len(self.ew)

    def edge_list(self) -> list[tuple[int, int, float]]:
        return list(zip(self.eu.tolist(), self.ev.tolist(), self.ew.tolist()))

    def validate(self) -> None:
        if len(self.eu) != len(self.ev) or len(self.eu) != len(self.ew):
            raise ValueError("edge arrays disagree in length")
        if self.edge_count:
            if (self.eu >= self.ev).any():
                raise ValueError("edges must satisfy u < v")
            if self.eu.min() < 0 or self.ev.max() >= self.node_count:
                raise ValueError("edge endpoint out of range")
            keys = self.eu * np.int64(self.node_count) + self.ev
            if len(np.unique(keys)) != len(keys):
                raise ValueError("duplicate edge pair")
            if np.abs(self.ew).max() > W_MAX + 1e-9:
                raise ValueError("edge weight beyond the logit clamp")

    @classmethod
    def from_edges(cls, node_count: int, edges, grid_shape=None) -> "PartitionGraph":
        """Build from (u, v, w) triples given in any order."""
        norm = {}
        for u, v, w in edges:
            if u == v:
                raise ValueError("self loop")
            key = (u, v) if u < v else (v, u)
            if key in norm:
                raise ValueError(f"duplicate edge {key}")
            norm[key] = float(w)
        items = sorted(norm.items())
        eu = np.array([k[0] for k, _ in items], dtype=np.int64)
        ev = np.array([k[1] for k, _ in items], dtype=np.int64)
        ew = np.array([w for _, w in items], dtype=np.float64)
        return cls(node_count, eu, ev, ew, grid_shape=grid_shape)


@dataclass
class Partition:
    """Node -> segment labeling; feasible for the cycle constraints by
    construction. Labels are dense from 0 in first-occurrence order."""

    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)

    @property
    def num_segments(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    @staticmethod
    def densify(raw: np.ndarray) -> "Partition":
        raw = np.asarray(raw, dtype=np.int64)
        out = np.empty_like(raw)
        mapping: dict = {}
        for i, s in enumerate(raw.tolist()):
            out[i] = mapping.setdefault(s, len(mapping))
        return Partition(out)


@dataclass
class SolverConfig:
    use_local_search: bool = True
    max_ls_sweeps: int = 20
    rng_seed: int = 0  # reserved; every tie-break is lexicographic

    def __post_init__(self):
        if self.max_ls_sweeps < 0:
            raise ValueError("max_ls_sweeps must be >= 0")


def logit_weight(alpha: np.ndarray) -> np.ndarray:
    """Clamped log-odds; alpha 0.5 maps to 0, the clamp bounds |w| by W_MAX."""
    a = np.clip(alpha, ALPHA_EPS, 1.0 - ALPHA_EPS)
    return np.log(a / (1.0 - a))


def build_graph(aff: AffinityMap, node_mask: np.ndarray,
                alpha_transform=None) -> PartitionGraph:
    """Graph over the masked-in pixels of one level.

    One edge per unordered in-window pair with both endpoints masked in;
    the two directed affinities are averaged (or the single valid one is
    taken alone), optionally attenuated by alpha_transform(alpha, u, v),
    then clamped and mapped through the logit. The center channel carries
    no pair and is skipped.
    """
    node_mask = np.asarray(node_mask, dtype=bool)
    h, w = aff.height, aff.width
    if node_mask.shape != (h, w):
        raise ValueError("node_mask shape mismatch")
    geo = aff.window
    pixels = np.flatnonzero(node_mask.ravel())
    node_id = np.full(h * w, -1, dtype=np.int64)
    node_id[pixels] = np.arange(len(pixels), dtype=np.int64)
    lin = np.arange(h * w, dtype=np.int64).reshape(h, w)

    eus, evs, ews = [], [], []
    for j, (dy, dx) in enumerate(geo.offsets):
        if j <= geo.center:  # each unordered pair once, via the forward offset
            continue
        jo = geo.opposite(j)
        us = (slice(0, h - dy), slice(max(0, -dx), w - max(0, dx)))
        vs = (slice(dy, h), slice(max(0, dx), w + min(0, dx)))
        mu = node_mask[us]
        mv = node_mask[vs]
        val_u = aff.valid[j][us]
        val_v = aff.valid[jo][vs]
        sel = mu & mv & (val_u | val_v)
        if not sel.any():
            continue
        au = aff.values[j][us][sel].astype(np.float64)
        av = aff.values[jo][vs][sel].astype(np.float64)
        both = (val_u & val_v)[sel]
        one_u = val_u[sel] & ~both
        alpha = np.where(both, 0.5 * (au + av), np.where(one_u, au, av))
        u_lin = lin[us][sel]
        v_lin = lin[vs][sel]
        if alpha_transform is not None:
            alpha = alpha_transform(alpha, u_lin, v_lin)
        eus.append(node_id[u_lin])
        evs.append(node_id[v_lin])
        ews.append(logit_weight(alpha))

    if eus:
        eu = np.concatenate(eus)
        ev = np.concatenate(evs)
        ew = np.concatenate(ews)
        order = np.lexsort((ev, eu))
        eu, ev, ew = eu[order], ev[order], ew[order]
    else:
        eu = np.empty(0, dtype=np.int64)
        ev = np.empty(0, dtype=np.int64)
        ew = np.empty(0, dtype=np.float64)
    payload = [pixels[i:i + 1] for i in range(len(pixels))]
    return PartitionGraph(len(pixels), eu, ev, ew,
                          node_payload=payload, grid_shape=(h, w))


def multicut_objective(g: PartitionGraph, p: Partition) -> float:
    """Total weight of edges whose endpoints land in different segments."""
    labels = p.labels
    if len(labels) != g.node_count:
        raise ValueError("partition does not label every node")
    if g.node_count and (labels.min() < 0 or labels.max() >= g.node_count):
        raise ValueError("label out of range")
    if not g.edge_count:
        return 0.0
    cut = labels[g.eu] != labels[g.ev]
    return float(g.ew[cut].sum())


_RGS_CACHE: dict = {}


def _rgs_matrix(n: int) -> np.ndarray:
    """All restricted-growth strings of length n, in lexicographic order.

    Row k is the canonical label vector of the k-th set partition: first
    entry 0, each later entry at most max(prefix) + 1.
    """
    if n in _RGS_CACHE:
        return _RGS_CACHE[n]
    rows = np.zeros((1, 1), dtype=np.int8)
    maxes = np.zeros(1, dtype=np.int8)
    for _ in range(n - 1):
        counts = maxes.astype(np.int64) + 2
        total = int(counts.sum())
        starts = np.repeat(np.cumsum(counts) - counts, counts)
        newcol = (np.arange(total, dtype=np.int64) - starts).astype(np.int8)
        rows = np.hstack([np.repeat(rows, counts, axis=0), newcol[:, None]])
        maxes = np.maximum(np.repeat(maxes, counts), newcol)
    _RGS_CACHE[n] = rows
    return rows


def solve_exact(g: PartitionGraph) -> Partition:
    """Global minimizer by enumerating every partition; test oracle.

    Ties break toward fewer segments, then the lexicographically smallest
    label vector. Refuses graphs above EXACT_NODE_CAP nodes.
    """
    n = g.node_count
    if n > EXACT_NODE_CAP:
        raise ValueError(f"solve_exact handles at most {EXACT_NODE_CAP} nodes, got {n}")
    if n == 0:
        return Partition(np.empty(0, dtype=np.int64))
    rows = _rgs_matrix(n)
    best = None  # (objective, num_segments, global_index, labels)
    chunk = max(1, 4_000_000 // max(1, g.edge_count * n))
    for start in range(0, len(rows), chunk):
        sub = rows[start:start + chunk]
        if g.edge_count:
            cut = sub[:, g.eu] != sub[:, g.ev]
            obj = cut.astype(np.float64) @ g.ew
        else:
            obj = np.zeros(len(sub))
        nseg = sub.max(axis=1).astype(np.int64) + 1
        local = np.lexsort((nseg, obj))[0]  # stable: earliest lex row wins ties
        cand = (float(obj[local]), int(nseg[local]), start + int(local))
        if best is None or cand < best[:3]:
            best = (*cand, sub[local].astype(np.int64).copy())
    return Partition(best[3])


def _gaec(n: int, eu, ev, ew):
    """Greedy additive edge contraction. Returns dense labels.

    Repeatedly contracts the highest-weight positive edge, summing
    parallel edges; weight ties pop in (u, v) lexicographic order. A
    per-pair stamp invalidates stale heap entries.
    """
    adj = [dict() for _ in range(n)]
    for u, v, w in zip(eu.tolist(), ev.tolist(), ew.tolist()):
        adj[u][v] = adj[u].get(v, 0.0) + w
        adj[v][u] = adj[v].get(u, 0.0) + w
    stamps: dict = {}
    heap = []
    for u in range(n):
        for v, w in adj[u].items():
            if u < v and w > 0.0:
                stamps[(u, v)] = 1
                heap.append((-w, u, v, 1))
    heapq.heapify(heap)

    alive = bytearray(b"\x01" * n)
    parent = list(range(n))

    while heap:
        negw, u, v, stamp = heapq.heappop(heap)
        if not alive[u] or not alive[v]:
            continue
        if stamps.get((u, v)) != stamp:
            continue
        # contract v's smaller adjacency into the larger one
        keep, drop = (u, v) if len(adj[u]) >= len(adj[v]) else (v, u)
        del adj[keep][drop]
        del adj[drop][keep]
        for x, wd in adj[drop].items():
            del adj[x][drop]
            neww = adj[keep].get(x, 0.0) + wd
            adj[keep][x] = neww
            adj[x][keep] = neww
            key = (keep, x) if keep < x else (x, keep)
            stamp2 = stamps.get(key, 0) + 1
            stamps[key] = stamp2
            if neww > 0.0:
                heapq.heappush(heap, (-neww, key[0], key[1], stamp2))
        adj[drop] = {}
        alive[drop] = 0
        parent[drop] = keep

    def find(i):
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    labels = np.empty(n, dtype=np.int64)
    mapping: dict = {}
    for i in range(n):
        labels[i] = mapping.setdefault(find(i), len(mapping))
    return labels


def _local_search(g: PartitionGraph, labels: np.ndarray, max_sweeps: int) -> np.ndarray:
    """Single-node moves between adjacent segments (or to a fresh one) plus
    whole-segment merges, accepting only strict decreases."""
    n = g.node_count
    adj0: list = [[] for _ in range(n)]
    for u, v, w in zip(g.eu.tolist(), g.ev.tolist(), g.ew.tolist()):
        adj0[u].append((v, w))
        adj0[v].append((u, w))
    labels = labels.copy()
    next_id = int(labels.max()) + 1 if n else 0

    for _ in range(max_sweeps):
        moved = False
        for x in range(n):
            cur = int(labels[x])
            sums: dict = {}
            for y, w in adj0[x]:
                s = int(labels[y])
                sums[s] = sums.get(s, 0.0) + w
            w_cur = sums.get(cur, 0.0)
            best_delta = -_STRICT
            target = None
            for s in sorted(k for k in sums if k != cur):
                delta = w_cur - sums[s]
                if delta < best_delta:
                    best_delta = delta
                    target = s
            if w_cur < best_delta:  # detach into a fresh segment
                best_delta = w_cur
                target = next_id
            if target is not None:
                if target == next_id:
                    next_id += 1
                labels[x] = target
                moved = True
        # merge adjacent segments while any inter-segment total is positive
        pair: dict = {}
        lu = labels[g.eu]
        lv = labels[g.ev]
        diff = lu != lv
        for a, b, w in zip(lu[diff].tolist(), lv[diff].tolist(), g.ew[diff].tolist()):
            key = (a, b) if a < b else (b, a)
            pair[key] = pair.get(key, 0.0) + w
        while True:
            best_key = None
            for k, s in pair.items():
                if s > _STRICT and (best_key is None or s > pair[best_key]
                                    or (s == pair[best_key] and k < best_key)):
                    best_key = k
            if best_key is None:
                break
            a, b = best_key
            labels[labels == b] = a
            merged: dict = {}
            for (x, y), s in pair.items():
                if (x, y) == (a, b):
                    continue
                x2 = a if x == b else x
                y2 = a if y == b else y
                if x2 == y2:
                    continue
                k2 = (x2, y2) if x2 < y2 else (y2, x2)
                merged[k2] = merged.get(k2, 0.0) + s
            pair = merged
            moved = True
        if not moved:
            break
    return Partition.densify(labels).labels


def solve_greedy_contract(g: PartitionGraph, cfg: SolverConfig) -> Partition:
    """Greedy contraction heuristic; deterministic for fixed inputs.

    The result never scores worse than leaving everything whole or
    cutting everything apart.
    """
    labels = _gaec(g.node_count, g.eu, g.ev, g.ew)
    if cfg.use_local_search and cfg.max_ls_sweeps > 0:
        labels = _local_search(g, labels, cfg.max_ls_sweeps)
    return Partition(labels)

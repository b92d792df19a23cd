"""Independent brute-force oracles shared by the test modules.

Everything here is written as plain loops over definitions, deliberately
ignoring the vectorized implementation paths it checks.
"""

import numpy as np

from affcut.rng import derive, uniform_stream


def window_offsets(r):
    half = (r - 1) // 2
    return [(dy, dx) for dy in range(-half, half + 1)
            for dx in range(-half, half + 1)]


def brute_gt_affinity(ids, r):
    """Loop-over-offsets ground-truth affinity (values, valid)."""
    h, w = ids.shape
    offs = window_offsets(r)
    values = np.zeros((len(offs), h, w), dtype=np.float32)
    valid = np.zeros((len(offs), h, w), dtype=bool)
    for j, (dy, dx) in enumerate(offs):
        for y in range(h):
            for x in range(w):
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w:
                    valid[j, y, x] = True
                    values[j, y, x] = 1.0 if ids[y, x] == ids[ny, nx] else 0.0
    return values, valid


def brute_affinity_loss(pred, gt, thing_mask, cfg):
    """Scalar reimplementation of the loss, channel by channel."""
    h, w = gt.values.shape[1:]
    u = uniform_stream(derive(cfg.rng_seed, 0xA11), h * w).reshape(h, w)
    num = 0.0
    den = 0.0
    for y in range(h):
        for x in range(w):
            vals = []
            ones = True
            for j in range(gt.values.shape[0]):
                if pred.valid[j, y, x] and gt.valid[j, y, x]:
                    vals.append((gt.values[j, y, x] - pred.values[j, y, x]) ** 2)
                    if gt.values[j, y, x] < 1.0:
                        ones = False
            if not vals:
                continue
            if ones and u[y, x] < cfg.drop_all_ones_prob:
                continue
            weight = cfg.object_weight if thing_mask[y, x] else 1.0
            num += weight * (sum(float(v) for v in vals) / len(vals))
            den += weight
    return num / den if den else 0.0


def enumerate_partitions(n):
    """All set partitions of range(n) as label tuples, lexicographic."""
    def rec(prefix, top):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for lab in range(top + 2):
            yield from rec(prefix + [lab], max(top, lab))
    if n == 0:
        yield ()
        return
    yield from rec([0], 0)


def brute_objective(edges, labels):
    return sum(w for u, v, w in edges if labels[u] != labels[v])


def brute_erode(mask, radius):
    """Square-window erosion; out-of-image counts as outside the mask."""
    h, w = mask.shape
    out = np.zeros_like(mask)
    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                continue
            ok = True
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    ny, nx = y + dy, x + dx
                    if not (0 <= ny < h and 0 <= nx < w) or not mask[ny, nx]:
                        ok = False
                        break
                if not ok:
                    break
            out[y, x] = ok
    return out


def same_labeling(a, b):
    """True when two label grids agree up to a bijective relabeling of the
    nonzero ids, with id 0 fixed."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        return False
    if ((a == 0) != (b == 0)).any():
        return False
    fwd = {}
    bwd = {}
    for va, vb in zip(a.ravel().tolist(), b.ravel().tolist()):
        if va == 0:
            continue
        if fwd.setdefault(va, vb) != vb or bwd.setdefault(vb, va) != va:
            return False
    return True

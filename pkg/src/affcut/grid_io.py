"""Bit-exact tensor container, label/score grid types, and raster rendering.

File format ("AFPY" container, version 1), all integers little-endian:

    offset  size        field
    0       4           magic, ASCII "AFPY"
    4       1           version, currently 1
    5       1           dtype code: 0 = float32, 1 = uint32
    6       1           ndim, 1..4
    7       4 * ndim    dims, uint32 each
    ...     payload     product(dims) values, row-major (last dim fastest)

The payload byte length must equal product(dims) * itemsize exactly; a
shorter file is a truncation error, a longer one trailing garbage.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .rng import SplitMix64

MAGIC = b"AFPY"
VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<u4")}
_DTYPE_CODES = {np.dtype("float32"): 0, np.dtype("uint32"): 1}

SCORE_SUM_TOL = 1e-4  # per-pixel class-score vectors must sum to 1 within this


class TensorFormatError(ValueError):
    """Base class for malformed AFPY files."""


class BadMagicError(TensorFormatError):
    pass


class UnsupportedVersionError(TensorFormatError):
    pass


class UnsupportedDtypeError(TensorFormatError):
    pass


class TruncatedPayloadError(TensorFormatError):
    pass


def write_tensor(path, tensor: np.ndarray) -> None:
    """Write a float32 or uint32 array; byte-identical across platforms."""
    arr = np.ascontiguousarray(tensor)
    if arr.dtype not in _DTYPE_CODES:
        raise ValueError(f"unsupported dtype {arr.dtype}; use float32 or uint32")
    if not 1 <= arr.ndim <= 4:
        raise ValueError(f"ndim must be in [1, 4], got {arr.ndim}")
    if any(d >= 2 ** 32 for d in arr.shape):
        raise ValueError(f"dimension overflows 32 bits: {arr.shape}")
    code = _DTYPE_CODES[arr.dtype]
    header = MAGIC + struct.pack("<BBB", VERSION, code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    payload = arr.astype(_DTYPES[code], copy=False).tobytes(order="C")
    with open(path, "wb") as f:
        f.write(header)
        f.write(payload)


def read_tensor(path) -> np.ndarray:
    """Inverse of write_tensor. Raises a distinct error per failure mode."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 7 or raw[:4] != MAGIC:
        raise BadMagicError(f"{path}: not an AFPY file")
    version, code, ndim = struct.unpack_from("<BBB", raw, 4)
    if version != VERSION:
        raise UnsupportedVersionError(f"{path}: version {version}")
    if code not in _DTYPES:
        raise UnsupportedDtypeError(f"{path}: dtype code {code}")
    if not 1 <= ndim <= 4:
        raise TensorFormatError(f"{path}: ndim {ndim} outside [1, 4]")
    dims_end = 7 + 4 * ndim
    if len(raw) < dims_end:
        raise TruncatedPayloadError(f"{path}: header cut short")
    dims = struct.unpack_from(f"<{ndim}I", raw, 7)
    dtype = _DTYPES[code]
    expected = dtype.itemsize
    for d in dims:  # python ints: no overflow on hostile headers
        expected *= d
    payload = raw[dims_end:]
    if len(payload) < expected:
        raise TruncatedPayloadError(
            f"{path}: payload {len(payload)} bytes, expected {expected}"
        )
    if len(payload) > expected:
        raise TensorFormatError(f"{path}: {len(payload) - expected} trailing bytes")
    arr = np.frombuffer(payload, dtype=dtype).reshape(dims)
    return arr.copy()  # own the memory; callers may mutate


INSTANCE_IDS = "instance_ids"
CLASS_IDS = "class_ids"
CLASS_SCORES = "class_scores"
_KINDS = (INSTANCE_IDS, CLASS_IDS, CLASS_SCORES)


@dataclass
class PyramidLevelGrid:
    """One pyramid level: instance ids, class ids, or per-class scores.

    id kinds hold a uint32 (h, w) grid with id 0 reserved for background;
    class_scores holds a float32 (C, h, w) grid of per-pixel probability
    vectors.
    """

    level: int
    kind: str
    data: np.ndarray

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown grid kind {self.kind!r}")
        if self.kind == CLASS_SCORES:
            if self.data.ndim != 3:
                raise ValueError("class_scores grid must be (C, h, w)")
            self.data = np.asarray(self.data, dtype=np.float32)
        else:
            if self.data.ndim != 2:
                raise ValueError(f"{self.kind} grid must be (h, w)")
            self.data = np.asarray(self.data, dtype=np.uint32)

    @property
    def height(self) -> int:
        return self.data.shape[-2]

    @property
    def width(self) -> int:
        return self.data.shape[-1]

    def validate(self) -> None:
        """Check the score invariants; id grids have nothing to check."""
        if self.kind == CLASS_SCORES:
            s = self.data
            if s.min() < 0.0 or s.max() > 1.0:
                raise ValueError("class scores outside [0, 1]")
            sums = s.sum(axis=0, dtype=np.float64)
            if np.abs(sums - 1.0).max() > SCORE_SUM_TOL:
                raise ValueError("class scores do not sum to 1 per pixel")


def level_shape(base_height: int, base_width: int, level: int) -> tuple[int, int]:
    """Level l is ceil(base / 2**l) per axis."""
    f = 1 << level
    return (-(-base_height // f), -(-base_width // f))


@dataclass
class Pyramid:
    """Finest-first stack of level grids (or affinity maps)."""

    levels: list
    base_height: int
    base_width: int

    def __post_init__(self):
        for l, grid in enumerate(self.levels):
            want = level_shape(self.base_height, self.base_width, l)
            got = (grid.height, grid.width)
            if got != want:
                raise ValueError(f"level {l} is {got}, expected {want}")

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, level: int):
        return self.levels[level]


# Distinct colors for distinct ids come from an affine bijection modulo
# M = 2**24 - 1: id -> (a * id + b) % M + 1 is injective on [1, M] whenever
# gcd(a, M) = 1, and never produces 0 (black), which is reserved for id 0.
_PALETTE_MOD = (1 << 24) - 1


def _palette_params(palette_seed: int) -> tuple[int, int]:
    rng = SplitMix64(palette_seed)
    b = rng.next_u64() % _PALETTE_MOD
    a = rng.next_u64() % _PALETTE_MOD
    while a == 0 or np.gcd(a, _PALETTE_MOD) != 1:
        a = (a + 1) % _PALETTE_MOD
    return a, b


def label_colors(ids: np.ndarray, palette_seed: int) -> np.ndarray:
    """Map ids to RGB uint8; id 0 -> black, distinct ids -> distinct colors."""
    ids = np.asarray(ids, dtype=np.uint64)
    a, b = _palette_params(palette_seed)
    c = (np.uint64(a) * ids + np.uint64(b)) % np.uint64(_PALETTE_MOD) + np.uint64(1)
    rgb = np.stack([(c >> np.uint64(16)) & np.uint64(255),
                    (c >> np.uint64(8)) & np.uint64(255),
                    c & np.uint64(255)], axis=-1).astype(np.uint8)
    rgb[ids == 0] = 0
    return rgb


def render_labels(labels: PyramidLevelGrid, palette_seed: int) -> bytes:
    """Render an instance-id grid to binary PPM (P6) bytes."""
    if labels.kind != INSTANCE_IDS:
        raise ValueError(f"render_labels needs instance_ids, got {labels.kind}")
    rgb = label_colors(labels.data, palette_seed)
    h, w = labels.data.shape
    return b"P6\n%d %d\n255\n" % (w, h) + rgb.tobytes(order="C")

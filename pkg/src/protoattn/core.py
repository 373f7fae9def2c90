"""Shared numeric types and helpers: feature grids, seeded randomness,
softmax/distance kernels, and the seeded linear projections that stand in
for learned key/value encoders.

All array math is done in float64 regardless of the storage precision of
the maps.  Reductions go through numpy, whose pairwise summation keeps
results reproducible to well below 1e-9 across runs.  The low-level
kernels (`softmax`, `pairwise_sq_dists`) also accept object-dtype arrays
so they can be driven with counting scalars for cost instrumentation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist


class ShapeError(ValueError):
    """Incompatible array dimensions."""


def _is_object(arr: np.ndarray) -> bool:
    return arr.dtype == object


def as_f64(arr) -> np.ndarray:
    """Coerce to float64 unless the array carries counting scalars."""
    a = np.asarray(arr)
    if _is_object(a):
        return a
    return np.asarray(a, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """A height x width x channels grid of real features, row-major.

    The unit of per-frame features, key maps, and value maps.  Data is held
    as a contiguous float64 array and treated as immutable after
    construction.
    """

    height: int
    width: int
    channels: int
    data: np.ndarray

    def __post_init__(self):
        for name in ("height", "width", "channels"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v <= 0:
                raise ShapeError(f"{name} must be a positive integer, got {v!r}")
        arr = np.ascontiguousarray(np.asarray(self.data, dtype=np.float64))
        if arr.size != self.height * self.width * self.channels:
            raise ShapeError(
                f"data has {arr.size} entries, expected "
                f"{self.height}*{self.width}*{self.channels}"
            )
        arr = arr.reshape(self.height, self.width, self.channels)
        if not np.all(np.isfinite(arr)):
            raise ValueError("feature map entries must be finite")
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, arr) -> "FeatureMap":
        a = np.asarray(arr, dtype=np.float64)
        if a.ndim != 3:
            raise ShapeError(f"expected an (H, W, C) array, got shape {a.shape}")
        return cls(a.shape[0], a.shape[1], a.shape[2], a)

    def pixels(self) -> np.ndarray:
        """View of the grid as an (H*W, C) matrix of pixel vectors."""
        return self.data.reshape(-1, self.channels)

    def same_spatial(self, other: "FeatureMap") -> bool:
        return self.height == other.height and self.width == other.width


class RngStream:
    """Deterministic random stream backed by numpy's PCG64.

    The stream is fully determined by its 64-bit seed plus an optional
    integer key path, fed into a SeedSequence: identical (seed, path) give
    identical sample sequences on every platform.  `substream` derives
    independent child streams, which keeps per-frame / per-object noise
    independent of how many other draws happened before.
    """

    def __init__(self, seed: int, _path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self._path = tuple(int(k) for k in _path)
        ss = np.random.SeedSequence([self.seed, *self._path])
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def substream(self, *keys: int) -> "RngStream":
        return RngStream(self.seed, self._path + tuple(keys))

    def standard_normal(self, shape):
        return self.generator.standard_normal(shape)

    def normal(self, loc, scale, shape):
        return self.generator.normal(loc, scale, shape)

    def uniform(self, low, high, shape):
        return self.generator.uniform(low, high, shape)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def choice(self, n, size, replace=False):
        return self.generator.choice(n, size=size, replace=replace)


@dataclass(frozen=True, eq=False)
class ProjectionParams:
    """Fixed per-pixel linear projections producing key and value maps.

    Stand-in for learned encoders: the attention machinery is agnostic to
    how embeddings are produced, and seeded projections make every
    downstream result reproducible and oracle-testable.  Regenerating from
    the same seed reproduces identical matrices.
    """

    key_weights: np.ndarray    # (C_in, D)
    value_weights: np.ndarray  # (C_in, C_v)
    seed: int

    def __post_init__(self):
        kw = as_f64(self.key_weights)
        vw = as_f64(self.value_weights)
        if kw.ndim != 2 or vw.ndim != 2:
            raise ShapeError("projection weights must be 2-D matrices")
        if kw.shape[0] != vw.shape[0]:
            raise ShapeError(
                f"key/value weights disagree on input channels: "
                f"{kw.shape[0]} vs {vw.shape[0]}"
            )
        object.__setattr__(self, "key_weights", kw)
        object.__setattr__(self, "value_weights", vw)

    @property
    def in_channels(self) -> int:
        return self.key_weights.shape[0]

    @property
    def key_dim(self) -> int:
        return self.key_weights.shape[1]

    @property
    def value_dim(self) -> int:
        return self.value_weights.shape[1]

    @classmethod
    def from_seed(cls, in_channels: int, key_dim: int, value_dim: int,
                  seed: int) -> "ProjectionParams":
        rng = RngStream(seed)
        scale = 1.0 / math.sqrt(in_channels)
        kw = rng.standard_normal((in_channels, key_dim)) * scale
        vw = rng.standard_normal((in_channels, value_dim)) * scale
        return cls(kw, vw, seed)

    @classmethod
    def tied(cls, in_channels: int, dim: int, seed: int) -> "ProjectionParams":
        """Key and value projections share one matrix (key space == value space)."""
        rng = RngStream(seed)
        w = rng.standard_normal((in_channels, dim)) / math.sqrt(in_channels)
        return cls(w, w.copy(), seed)

    @classmethod
    def identity(cls, channels: int) -> "ProjectionParams":
        eye = np.eye(channels)
        return cls(eye, eye.copy(), -1)


def softmax(logits, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax along `axis` (max-subtraction).

    Output entries are nonnegative and sum to 1 within 1e-12 along the
    axis; the result is invariant to adding a constant to the logits.
    Accepts object-dtype arrays (no validation performed on those).
    """
    arr = np.asarray(logits)
    if arr.size == 0:
        raise ValueError("softmax of an empty input")
    if not _is_object(arr):
        arr = np.asarray(arr, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("softmax requires finite logits")
    shifted = arr - np.max(arr, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def sq_dist(a, b) -> float:
    """Squared Euclidean distance sum_c (a_c - b_c)^2 between two vectors."""
    av = np.asarray(a, dtype=np.float64).ravel()
    bv = np.asarray(b, dtype=np.float64).ravel()
    if av.shape != bv.shape:
        raise ShapeError(f"length mismatch: {av.shape[0]} vs {bv.shape[0]}")
    d = av - bv
    return float(np.dot(d, d))


def pairwise_sq_dists(a, b) -> np.ndarray:
    """All squared distances between rows of `a` (M, D) and `b` (N, D).

    Float inputs go through scipy's direct sqeuclidean cdist; object-dtype
    inputs take an equivalent broadcasting path that performs exactly D
    multiplies per pair, so counting scalars see the true work.
    """
    am = np.asarray(a)
    bm = np.asarray(b)
    if am.ndim != 2 or bm.ndim != 2:
        raise ShapeError("pairwise_sq_dists expects 2-D matrices")
    if am.shape[1] != bm.shape[1]:
        raise ShapeError(
            f"feature dimension mismatch: {am.shape[1]} vs {bm.shape[1]}")
    if _is_object(am) or _is_object(bm):
        diff = am[:, None, :] - bm[None, :, :]
        return (diff * diff).sum(axis=-1)
    return cdist(as_f64(am), as_f64(bm), "sqeuclidean")


def encode_keys_values(frame: FeatureMap, params: ProjectionParams
                       ) -> tuple[FeatureMap, FeatureMap]:
    """Project a frame to a key map and a value map, pixel by pixel.

    Each output pixel is the matrix product of the input pixel with the
    respective weight matrix; the operation is linear and deterministic.
    """
    if frame.channels != params.in_channels:
        raise ShapeError(
            f"frame has {frame.channels} channels, projections expect "
            f"{params.in_channels}")
    px = frame.pixels()
    keys = np.dot(px, params.key_weights)
    values = np.dot(px, params.value_weights)
    kmap = FeatureMap(frame.height, frame.width, params.key_dim, keys)
    vmap = FeatureMap(frame.height, frame.width, params.value_dim, values)
    return kmap, vmap

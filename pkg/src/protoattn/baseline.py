"""Brute-force cross-attention over every spatio-temporal memory position.

The reference mechanism every condensed read is checked against: each
query pixel takes a softmax over all H*W*T memory positions and returns
the weighted sum of their values.  Cost grows quadratically with the
pixel count, which is exactly what the prototype path avoids.

Two kernels: `dot` (similarity = k_q . k_m) and `gaussian` (similarity =
-||k_q - k_m||^2 / (2 sigma2)).  With prototypes planted on the exact
memory pixels, the gaussian kernel matches the prototype read identically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import FeatureMap, ShapeError, pairwise_sq_dists, softmax

KERNEL_KINDS = ("dot", "gaussian")


@dataclass(frozen=True)
class KernelSpec:
    """Similarity kernel for dense attention logits."""

    kind: str = "dot"
    sigma2: float | None = None

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"kind must be one of {KERNEL_KINDS}, got {self.kind!r}")
        if self.kind == "gaussian":
            if self.sigma2 is None or not self.sigma2 > 0:
                raise ValueError("gaussian kernel needs sigma2 > 0")


def attention_logits(query_pixels, memory_pixels, kernel: KernelSpec):
    """(Q, M) similarity logits under the kernel; accepts object dtype."""
    if kernel.kind == "dot":
        return np.dot(query_pixels, memory_pixels.T)
    return -(pairwise_sq_dists(query_pixels, memory_pixels)
             / (2.0 * kernel.sigma2))


def nonlocal_read(query_pixels, memory_pixels, memory_values,
                  kernel: KernelSpec):
    """Array-level dense read: softmax over all memory positions, then
    the weighted sum of their values."""
    probs = softmax(attention_logits(query_pixels, memory_pixels, kernel),
                    axis=1)
    return np.dot(probs, memory_values)


def nonlocal_attend(query_keys: FeatureMap,
                    memory_keys: Sequence[FeatureMap],
                    memory_values: Sequence[FeatureMap],
                    kernel: KernelSpec = KernelSpec("dot")) -> FeatureMap:
    """Dense attention of the query map against a multi-frame memory.

    Every query pixel attends to every pixel of every memory frame.  All
    memory frames must share spatial dims; key channels must match the
    query; each value frame must match its key frame spatially.
    """
    if len(memory_keys) == 0:
        raise ValueError("memory must hold at least one frame")
    if len(memory_keys) != len(memory_values):
        raise ShapeError(
            f"{len(memory_keys)} key frames vs {len(memory_values)} value frames")
    first = memory_keys[0]
    c_v = memory_values[0].channels
    for km, vm in zip(memory_keys, memory_values):
        if km.channels != query_keys.channels:
            raise ShapeError(
                f"memory keys have {km.channels} channels, query has "
                f"{query_keys.channels}")
        if not km.same_spatial(first) or not vm.same_spatial(km):
            raise ShapeError("memory frames must share spatial dimensions")
        if vm.channels != c_v:
            raise ShapeError("memory value frames must share channels")
    mem_k = np.concatenate([km.pixels() for km in memory_keys], axis=0)
    mem_v = np.concatenate([vm.pixels() for vm in memory_values], axis=0)
    out = nonlocal_read(query_keys.pixels(), mem_k, mem_v, kernel)
    return FeatureMap(query_keys.height, query_keys.width, c_v, out)

"""Frame-level prototype attention over a FIFO memory of condensed frames.

Each past frame lives in the bank only as a PrototypeSet, so bank memory
is O(T * N * (D + C_v)) rather than O(T * H * W * C).  A read projects
every stored frame to the current frame independently (posterior-weighted
sum of its value prototypes), and temporal aggregation then fuses the
projections with the current value map through per-pixel similarity
weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FeatureMap, ShapeError, as_f64, softmax
from .gmm import PrototypeSet, posterior_probs


@dataclass(frozen=True, eq=False)
class ReconstructedFrame:
    """A stored frame projected onto the current frame's pixel grid."""

    y: FeatureMap
    source_index: int


@dataclass(frozen=True, eq=False)
class AggregationResult:
    """Fused map plus the per-pixel frame weights that produced it.

    `weights` has shape (H, W, 1 + n_reconstructions); channel 0 is the
    current frame's own weight, the rest follow reconstruction order.  At
    every pixel the weights sum to 1.
    """

    y_bar: FeatureMap
    weights: np.ndarray


class MemoryBank:
    """FIFO ring of (frame index, PrototypeSet) with fixed capacity.

    Frame indices must be strictly increasing; eviction is strictly
    oldest-first.  Single writer (the online loop), any number of readers
    between pushes.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.frames: list[tuple[int, PrototypeSet]] = []

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def indices(self) -> list[int]:
        return [i for i, _ in self.frames]

    def push_frame(self, protos: PrototypeSet, index: int):
        if self.frames and index <= self.frames[-1][0]:
            raise ValueError(
                f"frame index {index} not greater than last stored "
                f"{self.frames[-1][0]}")
        self.frames.append((int(index), protos))
        while len(self.frames) > self.capacity:
            self.frames.pop(0)


def prototype_read(query_pixels, key_means, value_protos, sigma2):
    """Array-level read: posterior-weighted sum of value prototypes per pixel."""
    probs = posterior_probs(query_pixels, key_means, sigma2)
    return np.dot(probs, value_protos)


def attend(query_keys: FeatureMap, protos: PrototypeSet) -> FeatureMap:
    """Read a condensed frame at every query pixel.

    Pixel i gets sum_j p(z=j | k_i) * v_j over the prototype components;
    the weights are the mixture posterior under the set's sigma2.
    """
    if query_keys.channels != protos.key_dim:
        raise ShapeError(
            f"query keys have {query_keys.channels} channels, prototypes "
            f"expect {protos.key_dim}")
    out = prototype_read(query_keys.pixels(), protos.key_means,
                         protos.value_protos, protos.sigma2)
    return FeatureMap(query_keys.height, query_keys.width,
                      protos.value_dim, out)


def reconstruct_all(bank: MemoryBank, query_keys: FeatureMap
                    ) -> list[ReconstructedFrame]:
    """Project every stored frame to the current frame, oldest first.

    An empty bank yields an empty list.
    """
    return [ReconstructedFrame(attend(query_keys, protos), index)
            for index, protos in bank.frames]


def aggregation_weights(current_pixels, recon_stack):
    """Similarity softmax over {current, reconstructions} at each pixel.

    `recon_stack` is (S-1, P, C_v); logits are dot products of the current
    value vector with each source's vector (the current frame contributes
    its self dot product).  Returns (P, S) weights, current frame first.
    Accepts object-dtype inputs for instrumentation.
    """
    sources = [current_pixels] + [recon_stack[s] for s in range(len(recon_stack))]
    logits = np.stack([(current_pixels * src).sum(axis=1) for src in sources],
                      axis=1)
    return softmax(logits, axis=1)


def aggregate(reconstructions: list[ReconstructedFrame],
              current_values: FeatureMap) -> AggregationResult:
    """Fuse reconstructions with the current value map.

    Per pixel, each source (the current frame's own value vector plus one
    vector per reconstruction) is weighted by the softmax of its dot
    product with the current vector, and the fused vector is the weighted
    sum.  With no reconstructions the result is the current map with
    weight 1.
    """
    h, w, c_v = (current_values.height, current_values.width,
                 current_values.channels)
    for rec in reconstructions:
        if not rec.y.same_spatial(current_values) or rec.y.channels != c_v:
            raise ShapeError(
                f"reconstruction from frame {rec.source_index} has shape "
                f"{rec.y.data.shape}, expected {(h, w, c_v)}")
    cur = current_values.pixels()
    if not reconstructions:
        weights = np.ones((h, w, 1))
        return AggregationResult(current_values, weights)
    recon_px = np.stack([rec.y.pixels() for rec in reconstructions], axis=0)
    weights = aggregation_weights(cur, recon_px)          # (P, S)
    stack = np.concatenate([cur[None], recon_px], axis=0)  # (S, P, C_v)
    fused = np.einsum("ps,spc->pc", weights, stack)
    y_bar = FeatureMap(h, w, c_v, fused)
    return AggregationResult(y_bar, weights.reshape(h, w, -1))


def multi_level_aggregate(levels: dict) -> dict:
    """Run one independent read-and-aggregate per pyramid level.

    `levels` maps a level name to (query_keys, current_values, bank).
    Levels never mix; each result is exactly aggregate(reconstruct_all(...)).
    """
    if not levels:
        raise ValueError("multi_level_aggregate needs at least one level")
    out = {}
    for name, entry in levels.items():
        try:
            query_keys, current_values, bank = entry
        except (TypeError, ValueError) as exc:
            raise ValueError(
                f"level {name!r} must be (query_keys, current_values, bank)"
            ) from exc
        recons = reconstruct_all(bank, query_keys)
        out[name] = aggregate(recons, current_values)
    return out

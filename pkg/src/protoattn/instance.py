"""Per-object contrastive prototypes: foreground vs background mixtures,
their attention maps, momentum propagation over time, and a deterministic
mask-refinement fusion.

Each tracked object keeps two prototype sets fitted on the key vectors
inside and around its mask.  Attending to both sets jointly yields a
foreground/background partition per pixel (the two maps sum to 1), which
a two-parameter fusion combines with the initial mask logits.  Across
frames the accumulated prototypes follow an exponential moving average,
and EM warm-starts from them preserve per-index correspondence.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .core import FeatureMap, ShapeError, as_f64, pairwise_sq_dists, softmax
from .gmm import (EmConfig, PrototypeSet, fit_gmm, posterior,
                  posterior_probs, value_prototypes)


class EmptyInstanceError(ValueError):
    """The mask selects no foreground pixels."""


class EmptyBackgroundError(ValueError):
    """No background pixels remain even after the whole-frame fallback."""


@dataclass(frozen=True, eq=False)
class MaskMap:
    """Binary mask with its tight bounding box.

    `box` is (x0, y0, x1, y1) with exclusive upper bounds, or None when
    the mask is empty.
    """

    height: int
    width: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.dtype != bool:
            v = v >= 128 if v.dtype.kind in "ui" else v.astype(bool)
        if v.shape != (self.height, self.width):
            raise ShapeError(
                f"mask values have shape {v.shape}, expected "
                f"{(self.height, self.width)}")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_array(cls, arr) -> "MaskMap":
        a = np.asarray(arr)
        if a.ndim != 2:
            raise ShapeError("mask must be 2-D")
        return cls(a.shape[0], a.shape[1], a)

    @property
    def box(self) -> tuple[int, int, int, int] | None:
        rows = np.flatnonzero(self.values.any(axis=1))
        cols = np.flatnonzero(self.values.any(axis=0))
        if rows.size == 0:
            return None
        return (int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1)

    @property
    def area(self) -> int:
        return int(self.values.sum())

    def iou(self, other: "MaskMap") -> float:
        inter = np.logical_and(self.values, other.values).sum()
        union = np.logical_or(self.values, other.values).sum()
        return float(inter / union) if union else 0.0

    def to_uint8(self) -> np.ndarray:
        return np.where(self.values, 255, 0).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class InstanceTrack:
    """Accumulated per-object prototype state with momentum."""

    track_id: int
    fg_protos: PrototypeSet
    bg_protos: PrototypeSet
    momentum: float
    last_seen: int

    def __post_init__(self):
        if not 0.0 <= self.momentum <= 1.0:
            raise ValueError(f"momentum must lie in [0, 1], got {self.momentum}")
        if self.fg_protos.key_dim != self.bg_protos.key_dim:
            raise ShapeError("fg/bg prototypes disagree on key dimension")
        if self.fg_protos.key_means is self.bg_protos.key_means:
            raise ValueError("fg and bg prototype sets must not share storage")


@dataclass(frozen=True, eq=False)
class AttentionPair:
    """Per-pixel foreground and background attention maps in [0, 1]."""

    fg_map: np.ndarray
    bg_map: np.ndarray

    def __post_init__(self):
        fg = as_f64(self.fg_map)
        bg = as_f64(self.bg_map)
        if fg.shape != bg.shape or fg.ndim != 2:
            raise ShapeError("attention maps must be equal-shape 2-D grids")
        for name, m in (("fg_map", fg), ("bg_map", bg)):
            if not np.all(np.isfinite(m)) or np.any(m < 0) or np.any(m > 1):
                raise ValueError(f"{name} entries must be finite and in [0, 1]")
        object.__setattr__(self, "fg_map", fg)
        object.__setattr__(self, "bg_map", bg)


def _scaled_box(box, factor, height, width):
    x0, y0, x1, y1 = box
    cx = (x0 + x1) / 2.0
    cy = (y0 + y1) / 2.0
    hw = (x1 - x0) * factor / 2.0
    hh = (y1 - y0) * factor / 2.0
    return (max(0, int(np.floor(cx - hw))), max(0, int(np.floor(cy - hh))),
            min(width, int(np.ceil(cx + hw))), min(height, int(np.ceil(cy + hh))))


def extract_fg_bg(keys: FeatureMap, mask: MaskMap, bg_factor: float = 2.0
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Split a frame's key vectors into instance and surround sets.

    Foreground keys sit under the mask; background keys fill the mask's
    bounding box scaled by `bg_factor` about its center (clamped to the
    image), minus the mask.  A localized surround is more discriminative
    than the whole frame; if it comes up empty the whole frame minus the
    mask is used instead.
    """
    if bg_factor < 1.0:
        raise ValueError(f"bg_factor must be >= 1, got {bg_factor}")
    if (mask.height, mask.width) != (keys.height, keys.width):
        raise ShapeError(
            f"mask is {mask.height}x{mask.width}, keys are "
            f"{keys.height}x{keys.width}")
    box = mask.box
    if box is None:
        raise EmptyInstanceError("empty instance")
    px = keys.pixels()
    fg_sel = mask.values.ravel()
    region = np.zeros_like(mask.values)
    x0, y0, x1, y1 = _scaled_box(box, bg_factor, mask.height, mask.width)
    region[y0:y1, x0:x1] = True
    bg_sel = np.logical_and(region.ravel(), ~fg_sel)
    if not bg_sel.any():
        bg_sel = ~fg_sel
    if not bg_sel.any():
        raise EmptyBackgroundError(
            "no background pixels left, even over the whole frame")
    return px[fg_sel].copy(), px[bg_sel].copy()


def fit_instance_protos(fg_keys, bg_keys, config_pos: EmConfig,
                        config_neg: EmConfig,
                        warm_start: InstanceTrack | None = None,
                        fg_values=None, bg_values=None,
                        value_mode: str = "normalized"
                        ) -> tuple[PrototypeSet, PrototypeSet]:
    """Fit the two contrastive mixtures for one object.

    Two independent EM runs.  With `warm_start`, EM initializes from the
    track's accumulated means, preserving per-index correspondence across
    frames (and allowing fewer samples than components).  Value vectors
    default to the keys themselves, so every prototype set stays complete
    even when no separate value map exists.
    """
    fg = as_f64(fg_keys)
    bg = as_f64(bg_keys)
    if warm_start is not None:
        config_pos = dataclasses.replace(
            config_pos, init="warm",
            warm_means=warm_start.fg_protos.key_means,
            n_protos=warm_start.fg_protos.n_protos)
        config_neg = dataclasses.replace(
            config_neg, init="warm",
            warm_means=warm_start.bg_protos.key_means,
            n_protos=warm_start.bg_protos.n_protos)
    out = []
    for keys, values, cfg in ((fg, fg_values, config_pos),
                              (bg, bg_values, config_neg)):
        vals = keys if values is None else as_f64(values)
        means, _ = fit_gmm(keys, cfg)
        assignments = posterior(keys, means, cfg.sigma2)
        protos = value_prototypes(assignments, vals, value_mode)
        out.append(PrototypeSet(means, protos, cfg.sigma2))
    return out[0], out[1]


def instance_attention_maps(keys: FeatureMap, fg: PrototypeSet,
                            bg: PrototypeSet, joint: bool = True
                            ) -> AttentionPair:
    """Foreground/background attention from the contrastive prototypes.

    Default (`joint=True`): one posterior over the concatenated fg+bg
    components; the maps are the summed posteriors of each side, so they
    partition 1 at every pixel.  `joint=False` keeps only each side's
    best-matching component and renormalizes those two scores, for
    comparison; the partition still holds.
    """
    if fg.key_dim != bg.key_dim:
        raise ShapeError("fg/bg prototypes disagree on key dimension")
    if keys.channels != fg.key_dim:
        raise ShapeError(
            f"keys have {keys.channels} channels, prototypes expect "
            f"{fg.key_dim}")
    if fg.sigma2 != bg.sigma2:
        raise ValueError(
            f"fg/bg prototype sets must share sigma2 ({fg.sigma2} vs {bg.sigma2})")
    px = keys.pixels()
    if joint:
        means = np.concatenate([fg.key_means, bg.key_means], axis=0)
        probs = posterior_probs(px, means, fg.sigma2)
        # summed posteriors can overshoot 1 by float eps; clamp
        fg_map = np.clip(probs[:, :fg.n_protos].sum(axis=1), 0.0, 1.0)
        bg_map = np.clip(probs[:, fg.n_protos:].sum(axis=1), 0.0, 1.0)
    else:
        two_sigma = 2.0 * fg.sigma2
        fg_logit = -(pairwise_sq_dists(px, fg.key_means).min(axis=1) / two_sigma)
        bg_logit = -(pairwise_sq_dists(px, bg.key_means).min(axis=1) / two_sigma)
        probs = softmax(np.stack([fg_logit, bg_logit], axis=1), axis=1)
        fg_map, bg_map = probs[:, 0], probs[:, 1]
    shape = (keys.height, keys.width)
    return AttentionPair(fg_map.reshape(shape), bg_map.reshape(shape))


def propagate(track: InstanceTrack, current_fg: PrototypeSet,
              current_bg: PrototypeSet,
              frame_index: int | None = None) -> InstanceTrack:
    """Momentum update of the accumulated prototypes.

    new = (1 - momentum) * accumulated + momentum * current, applied
    componentwise to key means and value prototypes alike; momentum 0
    keeps the track, momentum 1 replaces it.
    """
    lam = track.momentum
    updated = []
    for old, cur in ((track.fg_protos, current_fg),
                     (track.bg_protos, current_bg)):
        if old.key_means.shape != cur.key_means.shape or \
                old.value_protos.shape != cur.value_protos.shape:
            raise ShapeError("current prototypes do not match the track's shapes")
        updated.append(PrototypeSet(
            (1.0 - lam) * old.key_means + lam * cur.key_means,
            (1.0 - lam) * old.value_protos + lam * cur.value_protos,
            old.sigma2))
    seen = track.last_seen + 1 if frame_index is None else int(frame_index)
    return InstanceTrack(track.track_id, updated[0], updated[1], lam, seen)


def fuse_mask(initial_logits, attn: AttentionPair, a: float = 1.0,
              b: float = 2.0) -> MaskMap:
    """Deterministic mask refinement from attention evidence.

    refined logit = a * initial logit + b * (fg - bg); a pixel is
    foreground when sigmoid(refined) >= 0.5, i.e. refined >= 0.
    """
    logits = as_f64(initial_logits)
    if logits.shape != attn.fg_map.shape:
        raise ShapeError(
            f"initial logits have shape {logits.shape}, attention maps "
            f"{attn.fg_map.shape}")
    refined = a * logits + b * (attn.fg_map - attn.bg_map)
    return MaskMap.from_array(refined >= 0.0)


def mask_to_logits(mask: MaskMap, scale: float = 1.0) -> np.ndarray:
    """+-scale logit grid from a binary mask (detector stand-in)."""
    return np.where(mask.values, scale, -scale)

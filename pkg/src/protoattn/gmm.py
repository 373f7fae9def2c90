"""Isotropic Gaussian-mixture fitting of key vectors by EM.

A set of M key vectors is condensed into N prototypes: the component
means of a mixture with uniform priors and one shared variance sigma2.
Soft cluster assignments are the mixture posterior, which reduces to a
softmax over negative squared distances scaled by 2*sigma2.  Value
prototypes summarize a value vector per component, weighted by those
posteriors.

E and M steps run in double precision regardless of the storage precision
of the inputs.  The array-level kernels (`posterior_probs`, `m_step_probs`)
also accept object-dtype inputs so the exact multiply count of a run can
be measured with counting scalars.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import RngStream, ShapeError, as_f64, pairwise_sq_dists, softmax

EMPTY_MASS = 1e-12

INIT_KINDS = ("subsample", "farthest", "warm")
VALUE_MODES = ("literal", "normalized", "hard")


class EmptyClusterError(ValueError):
    """A component received (numerically) zero posterior mass."""


@dataclass(frozen=True, eq=False)
class PrototypeSet:
    """N key prototypes with matching value prototypes and shared variance.

    The condensed representation of one frame (or one instance region).
    """

    key_means: np.ndarray    # (N, D)
    value_protos: np.ndarray  # (N, C_v)
    sigma2: float

    def __post_init__(self):
        km = as_f64(self.key_means)
        vp = as_f64(self.value_protos)
        if km.ndim != 2 or vp.ndim != 2:
            raise ShapeError("prototype matrices must be 2-D")
        if km.shape[0] != vp.shape[0]:
            raise ShapeError(
                f"key/value prototype counts differ: {km.shape[0]} vs {vp.shape[0]}")
        if km.shape[0] < 1:
            raise ShapeError("a prototype set needs at least one component")
        if not (np.all(np.isfinite(km)) and np.all(np.isfinite(vp))):
            raise ValueError("prototype entries must be finite")
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        object.__setattr__(self, "key_means", km)
        object.__setattr__(self, "value_protos", vp)
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @property
    def n_protos(self) -> int:
        return self.key_means.shape[0]

    @property
    def key_dim(self) -> int:
        return self.key_means.shape[1]

    @property
    def value_dim(self) -> int:
        return self.value_protos.shape[1]


@dataclass(frozen=True, eq=False)
class AssignmentMap:
    """Row-stochastic posterior matrix (M keys x N components), with the
    per-key normalizing factors Z_i."""

    posteriors: np.ndarray   # (M, N)
    normalizers: np.ndarray  # (M,)

    def __post_init__(self):
        p = as_f64(self.posteriors)
        z = as_f64(self.normalizers)
        if p.ndim != 2 or z.ndim != 1 or z.shape[0] != p.shape[0]:
            raise ShapeError("posteriors must be (M, N) with (M,) normalizers")
        row_sums = p.sum(axis=1)
        if not np.all(np.abs(row_sums - 1.0) <= 1e-9):
            raise ValueError("posterior rows must sum to 1 within 1e-9")
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError("posterior entries must lie in [0, 1]")
        object.__setattr__(self, "posteriors", p)
        object.__setattr__(self, "normalizers", z)

    @property
    def n_keys(self) -> int:
        return self.posteriors.shape[0]

    @property
    def n_protos(self) -> int:
        return self.posteriors.shape[1]


@dataclass(frozen=True)
class EmConfig:
    """EM fitting configuration.

    Defaults follow the best ablation settings: 64 components for
    frame-level fits, 6 EM iterations, unit-free variance 0.5 so logits
    equal the negative squared distance.
    """

    n_protos: int = 64
    sigma2: float = 0.5
    n_iters: int = 6
    init: str = "subsample"
    warm_means: np.ndarray | None = field(default=None, repr=False)
    seed: int = 0

    def __post_init__(self):
        if self.n_protos < 1:
            raise ValueError("n_protos must be >= 1")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if self.n_iters < 0:
            raise ValueError("n_iters must be >= 0")
        if self.init not in INIT_KINDS:
            raise ValueError(f"init must be one of {INIT_KINDS}, got {self.init!r}")
        if self.init == "warm":
            if self.warm_means is None:
                raise ValueError("warm init requires warm_means")
            wm = as_f64(self.warm_means)
            if wm.ndim != 2 or wm.shape[0] != self.n_protos:
                raise ShapeError(
                    f"warm_means must be ({self.n_protos}, D), got {wm.shape}")
            object.__setattr__(self, "warm_means", wm)
        elif self.warm_means is not None:
            raise ValueError("warm_means only makes sense with init='warm'")


def posterior_probs(keys, means, sigma2):
    """Array-level soft assignments: softmax_j of -||k_i - mu_j||^2 / (2 sigma2)."""
    sq = pairwise_sq_dists(keys, means)
    logits = -(sq / (2.0 * sigma2))
    return softmax(logits, axis=1)


def posterior(keys, means, sigma2: float) -> AssignmentMap:
    """Soft cluster assignments of each key to each component.

    Row i is the softmax over components of the negative squared distance
    scaled by 2*sigma2; the normalizers record the unshifted partition
    values Z_i = sum_j exp(-||k_i - mu_j||^2 / (2 sigma2)).
    """
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    k = as_f64(keys)
    m = as_f64(means)
    logits = -(pairwise_sq_dists(k, m) / (2.0 * sigma2))
    row_max = np.max(logits, axis=1, keepdims=True)
    e = np.exp(logits - row_max)
    sums = e.sum(axis=1, keepdims=True)
    probs = e / sums
    normalizers = np.exp(row_max[:, 0] + np.log(sums[:, 0]))
    return AssignmentMap(probs, normalizers)


def _reseed_empty(keys, means, empty_cols):
    """Replace zero-mass components by the keys farthest from any prototype.

    Documented recovery: each empty component is re-seeded, in ascending
    column order, from the key with maximal distance to its nearest
    current prototype (including prototypes re-seeded earlier).
    """
    healthy = [j for j in range(means.shape[0]) if j not in empty_cols]
    if not healthy:
        raise EmptyClusterError("every component lost its posterior mass")
    pool = means[healthy]
    for j in sorted(empty_cols):
        nearest = pairwise_sq_dists(keys, pool).min(axis=1)
        idx = int(np.argmax(nearest))
        means[j] = keys[idx]
        pool = np.vstack([pool, keys[idx][None, :]])
    return means


def m_step_probs(keys, probs):
    """Array-level M step: mass-weighted means, with empty-cluster recovery.

    Recovery only runs on float inputs; instrumented (object-dtype) runs
    assume healthy components.
    """
    masses = probs.sum(axis=0)
    sums = np.dot(probs.T, keys)
    if probs.dtype == object or keys.dtype == object:
        return sums / masses[:, None]
    empty = np.nonzero(masses < EMPTY_MASS)[0]
    if empty.size == 0:
        return sums / masses[:, None]
    means = np.zeros_like(sums)
    ok = masses >= EMPTY_MASS
    means[ok] = sums[ok] / masses[ok, None]
    return _reseed_empty(as_f64(keys), means, set(int(j) for j in empty))


def m_step(keys, assignments: AssignmentMap) -> np.ndarray:
    """Posterior-weighted component means: mu_j = sum_i p_ij k_i / sum_i p_ij."""
    k = as_f64(keys)
    p = assignments.posteriors
    if p.shape[0] != k.shape[0]:
        raise ShapeError(
            f"{p.shape[0]} posterior rows for {k.shape[0]} keys")
    return m_step_probs(k, p)


def log_likelihood(keys, means, sigma2: float) -> float:
    """Total mixture log-density of the keys under the current components.

    sum_i log[(1/N) sum_j (2 pi sigma2)^(-D/2) exp(-||k_i - mu_j||^2 / 2 sigma2)],
    evaluated in log-space (log-sum-exp).
    """
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    k = as_f64(keys)
    m = as_f64(means)
    n, dim = m.shape
    logits = -(pairwise_sq_dists(k, m) / (2.0 * sigma2))
    row_max = logits.max(axis=1)
    lse = row_max + np.log(np.exp(logits - row_max[:, None]).sum(axis=1))
    const = -math.log(n) - 0.5 * dim * math.log(2.0 * math.pi * sigma2)
    return float(np.sum(lse + const))


def _init_means(keys: np.ndarray, config: EmConfig) -> np.ndarray:
    m, _ = keys.shape
    n = config.n_protos
    if config.init == "warm":
        wm = config.warm_means
        if wm.shape[1] != keys.shape[1]:
            raise ShapeError(
                f"warm means have dim {wm.shape[1]}, keys have {keys.shape[1]}")
        return wm.copy()
    if n > m:
        raise ValueError(
            f"cannot draw {n} components from {m} keys without warm start")
    if config.init == "subsample":
        idx = RngStream(config.seed).choice(m, size=n, replace=False)
        return keys[np.sort(idx)].copy()
    # farthest-point: start from the key farthest from the global mean,
    # then greedily add the key maximizing distance to the chosen set.
    center = keys.mean(axis=0, keepdims=True)
    chosen = [int(np.argmax(pairwise_sq_dists(keys, center)[:, 0]))]
    nearest = pairwise_sq_dists(keys, keys[chosen])[:, 0]
    while len(chosen) < n:
        idx = int(np.argmax(nearest))
        chosen.append(idx)
        nearest = np.minimum(nearest, pairwise_sq_dists(
            keys, keys[idx][None, :])[:, 0])
    return keys[chosen].copy()


def fit_gmm(keys, config: EmConfig) -> tuple[np.ndarray, np.ndarray]:
    """Fit component means to the keys; returns (means, likelihood trace).

    Alternates posterior and M steps for `config.n_iters` iterations from
    the configured initialization.  The trace holds n_iters + 1 mixture
    log-likelihood values (initialization first); with zero iterations the
    initialization is returned unchanged.
    """
    k = as_f64(keys)
    if k.ndim != 2 or k.shape[0] < 1:
        raise ShapeError("keys must be a non-empty (M, D) matrix")
    means = _init_means(k, config)
    trace = [log_likelihood(k, means, config.sigma2)]
    for _ in range(config.n_iters):
        probs = posterior_probs(k, means, config.sigma2)
        means = m_step_probs(k, probs)
        trace.append(log_likelihood(k, means, config.sigma2))
    return means, np.asarray(trace)


def value_prototypes(assignments: AssignmentMap, values,
                     mode: str = "literal") -> np.ndarray:
    """Per-component value summaries from posterior weights.

    literal    v_j = sum_i p_ij v_i  (the raw posterior-weighted sum; the
               component totals conserve the per-channel sum of the values)
    normalized v_j divided by the component mass sum_i p_ij
    hard       each v_i contributes fully to its argmax component
               (test-oracle mode)
    """
    if mode not in VALUE_MODES:
        raise ValueError(f"mode must be one of {VALUE_MODES}, got {mode!r}")
    v = as_f64(values)
    p = assignments.posteriors
    if v.ndim != 2 or v.shape[0] != p.shape[0]:
        raise ShapeError(
            f"values must be ({p.shape[0]}, C_v), got {v.shape}")
    if mode == "hard":
        out = np.zeros((p.shape[1], v.shape[1]))
        np.add.at(out, np.argmax(p, axis=1), v)
        return out
    sums = np.dot(p.T, v)
    if mode == "literal":
        return sums
    masses = p.sum(axis=0)
    if np.any(masses < EMPTY_MASS):
        raise EmptyClusterError(
            "normalized value prototypes need positive mass in every component")
    return sums / masses[:, None]


def build_prototype_set(keys, values, config: EmConfig,
                        value_mode: str = "literal"
                        ) -> tuple[PrototypeSet, np.ndarray]:
    """Fit means on the keys and attach value prototypes; returns the set
    plus the likelihood trace."""
    means, trace = fit_gmm(keys, config)
    assignments = posterior(keys, means, config.sigma2)
    protos = value_prototypes(assignments, values, value_mode)
    return PrototypeSet(means, protos, config.sigma2), trace

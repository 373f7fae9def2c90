"""Measured operation counts: run the real kernels on counting scalars.

`CountedFloat` wraps a float and tallies every multiply, add/subtract,
divide, and exp it participates in.  The measurement executors wrap
random data in counting scalars and push it through the same array-level
kernels the library uses (`posterior_probs`, `m_step_probs`,
`prototype_read`, `aggregation_weights`, `nonlocal_read`), so the
measured multiply count is the count of the actual computation, not of a
re-derived formula.  Stages outside the analytic model (value-prototype
summarization, the final aggregation blend) run on plain floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .baseline import KernelSpec, nonlocal_read
from .gmm import m_step_probs, posterior_probs
from .memory import aggregation_weights, prototype_read


@dataclass
class OpCounter:
    multiplies: int = 0
    adds: int = 0
    exps: int = 0
    divides: int = 0


class CountedFloat:
    """A float that reports its arithmetic to an OpCounter.

    numpy drives these through object arrays: ufuncs like np.exp call the
    `exp` method, reductions and matmuls go through the operators.
    Comparisons are free (they do no arithmetic).
    """

    __slots__ = ("value", "counter")

    def __init__(self, value: float, counter: OpCounter):
        self.value = float(value)
        self.counter = counter

    @staticmethod
    def _raw(other):
        return other.value if isinstance(other, CountedFloat) else float(other)

    def __mul__(self, other):
        self.counter.multiplies += 1
        return CountedFloat(self.value * self._raw(other), self.counter)

    __rmul__ = __mul__

    def __add__(self, other):
        self.counter.adds += 1
        return CountedFloat(self.value + self._raw(other), self.counter)

    __radd__ = __add__

    def __sub__(self, other):
        self.counter.adds += 1
        return CountedFloat(self.value - self._raw(other), self.counter)

    def __rsub__(self, other):
        self.counter.adds += 1
        return CountedFloat(self._raw(other) - self.value, self.counter)

    def __truediv__(self, other):
        self.counter.divides += 1
        return CountedFloat(self.value / self._raw(other), self.counter)

    def __rtruediv__(self, other):
        self.counter.divides += 1
        return CountedFloat(self._raw(other) / self.value, self.counter)

    def __neg__(self):
        return CountedFloat(-self.value, self.counter)

    def exp(self):
        self.counter.exps += 1
        return CountedFloat(math.exp(self.value), self.counter)

    def __lt__(self, other):
        return self.value < self._raw(other)

    def __le__(self, other):
        return self.value <= self._raw(other)

    def __gt__(self, other):
        return self.value > self._raw(other)

    def __ge__(self, other):
        return self.value >= self._raw(other)

    def __eq__(self, other):
        return self.value == self._raw(other)

    def __repr__(self):
        return f"CountedFloat({self.value!r})"


def wrap(arr: np.ndarray, counter: OpCounter) -> np.ndarray:
    flat = np.asarray(arr, dtype=np.float64).ravel()
    out = np.empty(flat.shape[0], dtype=object)
    for i, v in enumerate(flat):
        out[i] = CountedFloat(v, counter)
    return out.reshape(np.asarray(arr).shape)

def unwrap(arr: np.ndarray) -> np.ndarray:
    return np.vectorize(lambda c: c.value, otypes=[np.float64])(arr)


def measure_nonlocal(h: int, w: int, t: int, d: int, c_v: int,
                     seed: int = 0, sigma2: float = 0.5) -> OpCounter:
    """Multiply count of one dense gaussian-kernel read at the given dims."""
    rng = np.random.default_rng(seed)
    counter = OpCounter()
    query = wrap(rng.standard_normal((h * w, d)), counter)
    mem_k = wrap(rng.standard_normal((h * w * t, d)), counter)
    mem_v = wrap(rng.standard_normal((h * w * t, c_v)), counter)
    nonlocal_read(query, mem_k, mem_v, KernelSpec("gaussian", sigma2))
    return counter


def measure_attend(h: int, w: int, n: int, d: int, c_v: int,
                   seed: int = 0, sigma2: float = 0.5) -> OpCounter:
    """Multiply count of one prototype read (posterior + value weighting)."""
    rng = np.random.default_rng(seed)
    counter = OpCounter()
    query = wrap(rng.standard_normal((h * w, d)), counter)
    means = wrap(rng.standard_normal((n, d)), counter)
    protos = wrap(rng.standard_normal((n, c_v)), counter)
    prototype_read(query, means, protos, sigma2)
    return counter


def measure_pca(h: int, w: int, t: int, d: int, c_v: int, n: int,
                em_iters: int, seed: int = 0,
                sigma2: float = 0.5) -> OpCounter:
    """Multiply count of the full prototype pipeline over T memory frames.

    Per frame: EM iterations on the frame's own keys, then the read of
    the query against the fitted prototypes.  Afterwards one temporal
    aggregation over the T reconstructions plus the current value map.
    Value prototypes are formed on plain floats (outside the model), as
    is the final convex blend.
    """
    rng = np.random.default_rng(seed)
    counter = OpCounter()
    q_keys_f = rng.standard_normal((h * w, d))
    q_vals_f = rng.standard_normal((h * w, c_v))
    query = wrap(q_keys_f, counter)
    recons = []
    for _ in range(t):
        mem_keys_f = rng.standard_normal((h * w, d))
        mem_vals_f = rng.standard_normal((h * w, c_v))
        init = mem_keys_f[rng.choice(h * w, size=n, replace=False)]
        mem_keys = wrap(mem_keys_f, counter)
        means = wrap(init, counter)
        for _ in range(em_iters):
            probs = posterior_probs(mem_keys, means, sigma2)
            means = m_step_probs(mem_keys, probs)
        # value summarization is uncounted: literal mode on plain floats
        means_f = unwrap(means)
        probs_f = posterior_probs(mem_keys_f, means_f, sigma2)
        v_protos = wrap(np.dot(probs_f.T, mem_vals_f), counter)
        recons.append(prototype_read(query, means, v_protos, sigma2))
    cur = wrap(q_vals_f, counter)
    stack = np.stack(recons, axis=0) if recons else \
        np.empty((0, h * w, c_v), dtype=object)
    weights = aggregation_weights(cur, stack)
    # final blend runs outside the model, on unwrapped floats
    w_f = unwrap(weights)
    sources = np.concatenate([q_vals_f[None],
                              np.stack([unwrap(r) for r in recons], axis=0)
                              if recons else np.empty((0, h * w, c_v))])
    np.einsum("ps,spc->pc", w_f, sources)
    return counter

"""Analytic operation counts for the three attention mechanisms.

Conventions (reported as separate fields so any external FLOP convention
can be reconstituted):
  - one multiply-accumulate = 1 multiply + 1 add, counted separately;
  - exp is 1 unit of its own; divisions and max/subtract shifts are not
    counted;
  - memory is reported in element counts (the largest simultaneously live
    intermediate), not bytes.

Stages covered per mechanism:

prototype read (pca), per processed frame: EM iterations (posterior +
mean update, H*W*N*D multiplies each), the read against N prototypes
(H*W*N*(D+C_v)), then one temporal aggregation whose similarity logits
cost H*W*(T+1)*C_v; the final convex blend and the one-off value-prototype
summarization are outside the model.  Cost is affine in T and linear in N.

nonlocal: every query pixel against every memory position, logits plus
value weighting: H*W * (H*W*T) * (D + C_v).  Quadratic in pixel count.

mhsa (analytic only): heads * (3 projections H*W*D^2 + attention
2 * H*W * (H*W*T) * D/heads * heads).
"""

from __future__ import annotations

from dataclasses import dataclass

MECHANISMS = ("pca", "nonlocal", "mhsa")

# Counts above the unsigned-64 range are refused rather than reported.
COUNT_LIMIT = 2**63 - 1


@dataclass(frozen=True)
class CostReport:
    """Operation counts for one mechanism at one configuration."""

    mechanism: str
    h: int
    w: int
    t: int
    d: int
    c_v: int
    n: int
    em_iters: int
    heads: int
    analytic_multiplies: int
    analytic_adds: int
    analytic_exps: int
    peak_elements: int
    measured_multiplies: int | None = None

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"unknown mechanism {self.mechanism!r}")
        for name in ("analytic_multiplies", "analytic_adds", "analytic_exps",
                     "peak_elements"):
            v = getattr(self, name)
            if v < 0:
                raise ValueError(f"{name} must be >= 0")
            if v > COUNT_LIMIT:
                raise OverflowError(
                    f"{name}={v} exceeds the supported count range")


def _check_dims(**dims):
    for name, v in dims.items():
        if not isinstance(v, (int,)) or isinstance(v, bool) or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v!r}")


def nonlocal_cost(h: int, w: int, t: int, d: int, c_v: int) -> CostReport:
    """Dense attention: H*W queries each against H*W*T memory positions."""
    _check_dims(h=h, w=w, t=t, d=d, c_v=c_v)
    q = h * w
    m = q * t
    muls = q * m * (d + c_v)
    exps = q * m
    peak = q * m
    return CostReport("nonlocal", h, w, t, d, c_v, 0, 0, 0,
                      muls, muls, exps, peak)


def pca_cost(h: int, w: int, t: int, d: int, c_v: int, n: int,
             em_iters: int) -> CostReport:
    """Prototype path: per-frame EM plus read, then temporal aggregation."""
    _check_dims(h=h, w=w, t=t, d=d, c_v=c_v, n=n)
    if em_iters < 0:
        raise ValueError("em_iters must be >= 0")
    q = h * w
    em = em_iters * (q * n * d + q * n * d)
    read = q * n * (d + c_v)
    agg = q * (t + 1) * c_v
    muls = t * (em + read) + agg
    exps = t * (em_iters * q * n + q * n) + q * (t + 1)
    peak = q * n + t * n * (d + c_v)
    return CostReport("pca", h, w, t, d, c_v, n, em_iters, 0,
                      muls, muls, exps, peak)


def mhsa_cost(h: int, w: int, t: int, d: int, c_v: int,
              heads: int = 8) -> CostReport:
    """Multi-head self-attention, analytic only (never executed here)."""
    _check_dims(h=h, w=w, t=t, d=d, c_v=c_v, heads=heads)
    q = h * w
    m = q * t
    muls = heads * (3 * q * d * d + 2 * q * m * d)
    exps = heads * q * m
    peak = heads * q * m
    return CostReport("mhsa", h, w, t, d, c_v, 0, 0, heads,
                      muls, muls, exps, peak)

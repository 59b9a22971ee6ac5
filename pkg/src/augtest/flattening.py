"""Prediction-assisted flattening of discrete distributions.

A flattening splits base symbol i into b_i sub-buckets of equal conditional
mass p(i)/b_i. Splitting never changes l1 distances between distributions
that share the same buckets, while it shrinks l2 norms; bucket counts built
from an accurate prediction plus a small Poissonized sample make the expected
flattened l2 norm small enough for collision-based testing.

Bucket rule per axis: b_i = floor(pred(i)/nu) + N_i + 1, where N_i is the
observed count of symbol i in the flattening sample and nu defaults to 1/n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .domain import DomainError, JointDistribution, ProductDomain, Rng, marginal

# Tolerance added before floor() so that masses intended to be exact
# multiples of nu are not knocked down a bucket by float representation.
_FLOOR_FUZZ = 1e-9


class AxisFlattening:
    """Bucket layout for one axis: symbol i owns buckets offsets[i] .. offsets[i]+b_i-1."""

    def __init__(self, buckets):
        b = np.asarray(buckets, dtype=np.int64)
        if b.ndim != 1 or b.size == 0:
            raise DomainError("bucket vector must be 1-D and nonempty")
        if np.any(b < 1):
            raise DomainError("every symbol needs at least one bucket")
        self.buckets = b.copy()
        self.buckets.flags.writeable = False
        self.offsets = np.concatenate(([0], np.cumsum(b)[:-1]))
        self.offsets.flags.writeable = False
        self.base_size = int(b.size)
        self.flat_size = int(b.sum())

    def __eq__(self, other):
        return isinstance(other, AxisFlattening) and np.array_equal(
            self.buckets, other.buckets
        )

    def __repr__(self):
        return f"AxisFlattening(base={self.base_size}, flat={self.flat_size})"


def build_axis_flattening(pred_marginal, counts, nu: float | None = None) -> AxisFlattening:
    """Builds the bucket layout for one axis from a predicted marginal and counts.

    Args:
        pred_marginal: Predicted marginal mass vector over [n] (array-like or
            1-axis JointDistribution).
        counts: Observed sample counts N_i over [n], nonnegative ints.
        nu: Bucket granularity; defaults to 1/n, giving b_i = floor(n*pred(i)) + N_i + 1.

    Returns:
        AxisFlattening with flat_size <= 1/nu + n + sum(counts).
    """
    if isinstance(pred_marginal, JointDistribution):
        pred_marginal = pred_marginal.probs
    q = np.asarray(pred_marginal, dtype=np.float64).reshape(-1)
    c = np.asarray(counts, dtype=np.int64).reshape(-1)
    if q.size != c.size:
        raise DomainError(f"marginal length {q.size} != counts length {c.size}")
    if np.any(q < 0):
        raise DomainError("predicted marginal has negative entries")
    if np.any(c < 0):
        raise DomainError("counts must be nonnegative")
    n = q.size
    if nu is None:
        nu = 1.0 / n
    if not (0 < nu <= 1):
        raise DomainError(f"nu must be in (0, 1], got {nu}")
    b = np.floor(q / nu + _FLOOR_FUZZ).astype(np.int64) + c + 1
    return AxisFlattening(b)


class ProductFlattening:
    """Per-axis flattenings applied jointly; flat domain is the product of flat sizes."""

    def __init__(self, axes: Sequence[AxisFlattening]):
        if len(axes) == 0:
            raise DomainError("need at least one axis flattening")
        self.axes = list(axes)
        self.base_dims = tuple(f.base_size for f in self.axes)
        self.flat_dims = tuple(f.flat_size for f in self.axes)
        self.flat_size = math.prod(self.flat_dims)

    @property
    def arity(self) -> int:
        return len(self.axes)

    def to_json(self) -> dict:
        return {
            f"buckets_axis{i + 1}": [int(b) for b in f.buckets]
            for i, f in enumerate(self.axes)
        }

    @staticmethod
    def from_json(obj: dict) -> "ProductFlattening":
        axes = []
        i = 1
        while f"buckets_axis{i}" in obj:
            axes.append(AxisFlattening(obj[f"buckets_axis{i}"]))
            i += 1
        return ProductFlattening(axes)


def flatten_samples(pf: ProductFlattening, base: np.ndarray, rng: Rng) -> np.ndarray:
    """Maps base index rows (k, d) to flattened index rows (k, d).

    Sub-bucket choices are drawn fresh per row, matching the i.i.d. flattened
    sample model; nothing is memoized per base symbol.
    """
    base = np.asarray(base)
    if base.ndim != 2 or base.shape[1] != pf.arity:
        raise DomainError(f"expected sample rows of arity {pf.arity}")
    out = np.empty_like(base, dtype=np.int64)
    for ax, f in enumerate(pf.axes):
        ids = base[:, ax]
        b = f.buckets[ids]
        out[:, ax] = f.offsets[ids] + rng.gen.integers(0, b)
    return out


def flatten_sample(pf: ProductFlattening, base: Sequence[int], rng: Rng) -> tuple[int, ...]:
    """Single-sample form of flatten_samples; identity map when every b_i = 1."""
    row = np.asarray([base], dtype=np.int64)
    return tuple(int(v) for v in flatten_samples(pf, row, rng)[0])


def flatten_distribution_explicit(
    p: JointDistribution, pf: ProductFlattening
) -> JointDistribution:
    """The exact flattened distribution: cell mass p(x) split evenly over its buckets."""
    if p.dims != pf.base_dims:
        raise DomainError(f"distribution dims {p.dims} != flattening base {pf.base_dims}")
    t = p.table().astype(np.float64)
    for ax, f in enumerate(pf.axes):
        t = np.repeat(t, f.buckets, axis=ax)
        w = np.repeat(f.buckets.astype(np.float64), f.buckets)
        shape = [1] * t.ndim
        shape[ax] = w.size
        t = t / w.reshape(shape)
    return JointDistribution(ProductDomain(pf.flat_dims), t.reshape(-1))


def expected_flat_norm_sq(p: JointDistribution, pf: ProductFlattening) -> float:
    """Exact squared l2 norm of the flattened distribution, sum p(x)^2 / prod b."""
    pf_dist = flatten_distribution_explicit(p, pf)
    return float(np.dot(pf_dist.probs, pf_dist.probs))


# ---------------------------------------------------------------------------
# Flattened sample views over a joint sampler.
#
# A "flat view" is 1-D sample access over [size] with an optional explicit
# law. Estimators only need draw/size/probs/cost; cost is the number of base
# joint draws consumed per emitted sample, used for the sample account.


@dataclass
class FlatView:
    size: int
    probs: np.ndarray | None
    cost: int
    _draw: Callable[[int, Rng], np.ndarray]

    def draw(self, count: int, rng: Rng) -> np.ndarray:
        return self._draw(count, rng)


def _flatten_axis_ids(f: AxisFlattening, ids: np.ndarray, rng: Rng) -> np.ndarray:
    return f.offsets[ids] + rng.gen.integers(0, f.buckets[ids])


def flattened_axis_view(sampler, axis: int, f: AxisFlattening) -> FlatView:
    """View of the flattened marginal on one axis; one joint draw per sample."""
    probs = None
    if getattr(sampler, "dist", None) is not None:
        marg = marginal(sampler.dist, [axis]).probs
        probs = np.repeat(marg / f.buckets, f.buckets)

    def _draw(count: int, rng: Rng) -> np.ndarray:
        rows = sampler.draw(count, rng.split(0))
        return _flatten_axis_ids(f, rows[:, axis], rng.split(1))

    return FlatView(size=f.flat_size, probs=probs, cost=1, _draw=_draw)


def flattened_joint_view(sampler, pf: ProductFlattening) -> FlatView:
    """View of the flattened joint, linearized row-major over the flat dims."""
    probs = None
    if getattr(sampler, "dist", None) is not None:
        probs = flatten_distribution_explicit(sampler.dist, pf).probs

    def _draw(count: int, rng: Rng) -> np.ndarray:
        rows = sampler.draw(count, rng.split(0))
        flat = flatten_samples(pf, rows, rng.split(1))
        return np.ravel_multi_index(tuple(flat.T), pf.flat_dims)

    return FlatView(size=pf.flat_size, probs=probs, cost=1, _draw=_draw)


def flattened_product_view(sampler, pf: ProductFlattening) -> FlatView:
    """View of the product of flattened marginals.

    One emitted sample mixes coordinate l from its own independent joint draw,
    so it costs arity joint draws; the law is exactly the product of the
    per-axis flattened marginals.
    """
    d = pf.arity
    probs = None
    if getattr(sampler, "dist", None) is not None:
        acc = np.ones(1)
        for ax, f in enumerate(pf.axes):
            marg = marginal(sampler.dist, [ax]).probs
            acc = np.multiply.outer(acc, np.repeat(marg / f.buckets, f.buckets))
        probs = acc.reshape(-1)

    def _draw(count: int, rng: Rng) -> np.ndarray:
        cols = []
        for ax, f in enumerate(pf.axes):
            rows = sampler.draw(count, rng.split(2 * ax))
            cols.append(_flatten_axis_ids(f, rows[:, ax], rng.split(2 * ax + 1)))
        return np.ravel_multi_index(tuple(cols), pf.flat_dims)

    return FlatView(size=pf.flat_size, probs=probs, cost=d, _draw=_draw)

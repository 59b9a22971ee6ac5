"""Discrete product domains, joint distributions, and the shared runtime plumbing.

Everything downstream (flattening, estimators, testers, instance generators)
works with dense distributions over a product domain [n_1] x ... x [n_d],
stored row-major so the last axis varies fastest. Indices are 0-based.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Mass-sum tolerance for accepting a vector as a distribution. Inputs outside
# this band are rejected, never renormalized.
MASS_TOL = 1e-9


class DomainError(ValueError):
    """Raised for malformed domains, non-distributions, or axis misuse."""


@dataclass(frozen=True)
class ProductDomain:
    """A finite product domain [n_1] x ... x [n_d].

    Attributes:
        dims: Per-axis sizes, each >= 2.
    """

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        if len(dims) < 1:
            raise DomainError("domain needs at least one axis")
        if any(n < 2 for n in dims):
            raise DomainError(f"every axis size must be >= 2, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def arity(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        return math.prod(self.dims)

    def validate_axes(self, axes: Sequence[int]) -> tuple[int, ...]:
        """Checks a nonempty, duplicate-free axis subset and returns it as a tuple."""
        axes = tuple(int(a) for a in axes)
        if len(axes) == 0:
            raise DomainError("axis subset must be nonempty")
        if len(set(axes)) != len(axes):
            raise DomainError(f"duplicate axes in {axes}")
        for a in axes:
            if not 0 <= a < self.arity:
                raise DomainError(f"axis {a} out of range for arity {self.arity}")
        return axes


class JointDistribution:
    """A probability distribution over a ProductDomain, stored dense row-major.

    The mass vector is validated on construction: entries must be nonnegative
    and sum to 1 within MASS_TOL. The stored array is read-only.
    """

    def __init__(self, domain: ProductDomain, probs):
        self.domain = domain
        p = np.asarray(probs, dtype=np.float64).reshape(-1)
        if p.shape[0] != domain.size:
            raise DomainError(
                f"prob vector length {p.shape[0]} != domain size {domain.size}"
            )
        if not np.all(np.isfinite(p)):
            raise DomainError("prob vector has non-finite entries")
        if np.any(p < 0):
            raise DomainError("prob vector has negative entries")
        total = float(p.sum())
        if abs(total - 1.0) > MASS_TOL:
            raise DomainError(f"prob mass {total} outside 1 +/- {MASS_TOL}")
        p = p.copy()
        p.flags.writeable = False
        self.probs = p
        self._cum = None  # lazy cumulative table for sampling

    @property
    def dims(self) -> tuple[int, ...]:
        return self.domain.dims

    def table(self) -> np.ndarray:
        """The mass vector reshaped to the domain dims (read-only view)."""
        return self.probs.reshape(self.dims)

    def cumulative(self) -> np.ndarray:
        if self._cum is None:
            self._cum = np.cumsum(self.probs)
        return self._cum

    def __eq__(self, other):
        return (
            isinstance(other, JointDistribution)
            and self.dims == other.dims
            and np.array_equal(self.probs, other.probs)
        )

    def __repr__(self):
        return f"JointDistribution(dims={self.dims})"

    @staticmethod
    def uniform(dims: Sequence[int]) -> "JointDistribution":
        domain = ProductDomain(tuple(dims))
        return JointDistribution(domain, np.full(domain.size, 1.0 / domain.size))

    @staticmethod
    def from_table(table) -> "JointDistribution":
        arr = np.asarray(table, dtype=np.float64)
        return JointDistribution(ProductDomain(arr.shape), arr.reshape(-1))


# ---------------------------------------------------------------------------
# Randomness


class Rng:
    """Deterministic random stream keyed by (seed, stream).

    Identical (seed, stream) pairs reproduce identical draw sequences.
    `split(i)` derives an independent child stream; children with distinct
    indices never collide, which keeps concurrent trials reproducible.
    """

    def __init__(self, seed: int, stream: int | tuple[int, ...] = ()):
        if isinstance(stream, int):
            stream = (stream,)
        self.seed = int(seed)
        self.stream = tuple(int(s) for s in stream)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.stream)
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def split(self, index: int) -> "Rng":
        return Rng(self.seed, self.stream + (int(index),))

    def __repr__(self):
        return f"Rng(seed={self.seed}, stream={self.stream})"


def poisson(mean: float, rng: Rng) -> int:
    """One Poisson draw with the given mean. mean 0 gives 0 with no randomness."""
    if not (math.isfinite(mean) and mean >= 0):
        raise DomainError(f"Poisson mean must be finite and >= 0, got {mean}")
    if mean == 0:
        return 0
    return int(rng.gen.poisson(mean))


# ---------------------------------------------------------------------------
# Sample accounting


@dataclass
class SampleAccount:
    """Per-stage ledger of how many base-distribution samples a run consumed.

    Counts are in units of draws from the joint input distribution. Stages:
    flattening (bucket construction), norm (l2 estimation), closeness
    (two-stream comparison), learning (empirical-histogram tester).
    """

    flattening: int = 0
    norm: int = 0
    closeness: int = 0
    learning: int = 0

    def add(self, stage: str, count: int) -> None:
        if count < 0:
            raise DomainError("sample counts are nonnegative")
        setattr(self, stage, getattr(self, stage) + int(count))

    @property
    def total(self) -> int:
        return self.flattening + self.norm + self.closeness + self.learning

    def merge(self, other: "SampleAccount") -> None:
        self.flattening += other.flattening
        self.norm += other.norm
        self.closeness += other.closeness
        self.learning += other.learning

    def as_dict(self) -> dict:
        return {
            "flattening": self.flattening,
            "norm": self.norm,
            "closeness": self.closeness,
            "learning": self.learning,
            "total": self.total,
        }


# ---------------------------------------------------------------------------
# Distances and marginals


def tv_distance(p: JointDistribution, q: JointDistribution) -> float:
    """Total variation distance, half the l1 distance of the mass vectors."""
    if p.dims != q.dims:
        raise DomainError(f"domain mismatch: {p.dims} vs {q.dims}")
    return 0.5 * float(np.abs(p.probs - q.probs).sum())


def l2_norm_sq(p: JointDistribution) -> float:
    """Exact squared l2 norm of the mass vector."""
    return float(np.dot(p.probs, p.probs))


def marginal(p: JointDistribution, axes: Sequence[int]) -> JointDistribution:
    """Marginal of p on the given axis subset, in the order given."""
    axes = p.domain.validate_axes(axes)
    drop = tuple(a for a in range(p.domain.arity) if a not in axes)
    t = p.table()
    if drop:
        t = t.sum(axis=drop)
    kept = [a for a in range(p.domain.arity) if a not in drop]
    # t's axes follow the original order; permute to the requested order.
    perm = [kept.index(a) for a in axes]
    t = np.transpose(t, perm)
    return JointDistribution(ProductDomain(t.shape), np.ascontiguousarray(t).reshape(-1))


def _check_grouping(arity: int, grouping: Sequence[Sequence[int]]) -> list[tuple[int, ...]]:
    blocks = [tuple(int(a) for a in b) for b in grouping]
    seen = [a for b in blocks for a in b]
    if sorted(seen) != list(range(arity)):
        raise DomainError(f"grouping {blocks} is not a partition of axes 0..{arity - 1}")
    if any(len(b) == 0 for b in blocks):
        raise DomainError("grouping blocks must be nonempty")
    return blocks


def product_of_marginals(
    p: JointDistribution, grouping: Sequence[Sequence[int]] | None = None
) -> JointDistribution:
    """Product of block marginals of p, re-laid-out on p's own domain.

    Args:
        p: Input distribution.
        grouping: Partition of the axes; each block's marginal is taken as a
            unit. Default is all singletons (the full product of marginals).

    Returns:
        The distribution q(x) = prod_B p_B(x_B) on p's domain.
    """
    if grouping is None:
        grouping = [[a] for a in range(p.domain.arity)]
    blocks = _check_grouping(p.domain.arity, grouping)
    out = np.ones(1)
    order: list[int] = []
    for block in blocks:
        mb = marginal(p, block)
        out = np.multiply.outer(out, mb.table())
        order.extend(block)
    out = out.reshape([p.dims[a] for a in order])
    # out currently has axes in block-concatenated order; undo.
    inv = np.argsort(order)
    out = np.transpose(out, inv)
    return JointDistribution(p.domain, np.ascontiguousarray(out).reshape(-1))


def tv_to_own_product(
    p: JointDistribution, grouping: Sequence[Sequence[int]] | None = None
) -> float:
    """tv distance from p to the product of its own (block) marginals."""
    return tv_distance(p, product_of_marginals(p, grouping))


# ---------------------------------------------------------------------------
# Sampling


def draw_samples(p: JointDistribution, count: int, rng: Rng) -> np.ndarray:
    """Draws i.i.d. samples from p via its cumulative table.

    Returns:
        An int array of shape (count, arity); each row is one index tuple.
    """
    if count < 0:
        raise DomainError("sample count must be >= 0")
    d = p.domain.arity
    if count == 0:
        return np.empty((0, d), dtype=np.int64)
    cum = p.cumulative()
    u = rng.gen.random(count)
    flat = np.searchsorted(cum, u, side="right")
    np.clip(flat, 0, p.domain.size - 1, out=flat)
    idx = np.unravel_index(flat, p.dims)
    return np.stack(idx, axis=1).astype(np.int64)


class JointSampler:
    """Sample access to an explicit joint distribution.

    Testers only rely on the draw/dims interface; the explicit `dist` handle
    additionally enables count-level batch draws that are identical in law to
    per-sample streaming (see the estimators module).
    """

    def __init__(self, dist: JointDistribution):
        self.dist = dist
        self.dims = dist.dims
        self.cost = 1

    def draw(self, count: int, rng: Rng) -> np.ndarray:
        return draw_samples(self.dist, count, rng)


# ---------------------------------------------------------------------------
# Reshaping (bijective reindexing; the last dimension varies fastest)


def merge_axes(p: JointDistribution, blocks: Sequence[Sequence[int]]) -> JointDistribution:
    """Merges each axis block into a single axis, in block order.

    The relabeling is the row-major bijection on each block (last axis in the
    block varies fastest), so probabilities are carried over unchanged and the
    map is invertible by `split_axis`.
    """
    blocks = _check_grouping(p.domain.arity, blocks)
    order = [a for b in blocks for a in b]
    t = np.transpose(p.table(), order)
    new_dims = tuple(math.prod(p.dims[a] for a in b) for b in blocks)
    t = np.ascontiguousarray(t).reshape(new_dims)
    return JointDistribution(ProductDomain(new_dims), t.reshape(-1))


def split_axis(p: JointDistribution, axis: int, factors: Sequence[int]) -> JointDistribution:
    """Splits one axis into several, row-major (inverse of merging them back)."""
    (axis,) = p.domain.validate_axes([axis])
    factors = tuple(int(f) for f in factors)
    if math.prod(factors) != p.dims[axis]:
        raise DomainError(
            f"factors {factors} do not multiply to axis size {p.dims[axis]}"
        )
    new_dims = p.dims[:axis] + factors + p.dims[axis + 1 :]
    t = p.table().reshape(new_dims)
    return JointDistribution(ProductDomain(new_dims), np.ascontiguousarray(t).reshape(-1))


def merge_index(
    idx: np.ndarray, dims: Sequence[int], blocks: Sequence[Sequence[int]]
) -> np.ndarray:
    """Applies the merge relabeling to index rows. idx shape (k, d) -> (k, len(blocks))."""
    idx = np.asarray(idx)
    cols = []
    for block in blocks:
        col = idx[:, block[0]].astype(np.int64)
        for a in block[1:]:
            col = col * dims[a] + idx[:, a]
        cols.append(col)
    return np.stack(cols, axis=1)


def split_index(
    idx: np.ndarray, dims: Sequence[int], axis: int, factors: Sequence[int]
) -> np.ndarray:
    """Applies the split relabeling to index rows, inverse of merge_index."""
    idx = np.asarray(idx)
    col = idx[:, axis].astype(np.int64)
    out = []
    for f in reversed(factors):
        out.append(col % f)
        col = col // f
    parts = list(reversed(out))
    pieces = [idx[:, :axis]] + [np.stack(parts, axis=1)] + [idx[:, axis + 1 :]]
    return np.concatenate(pieces, axis=1)


# ---------------------------------------------------------------------------
# JSON interchange: {"dims": [...], "probs": [...]}


def distribution_to_json(p: JointDistribution) -> dict:
    return {"dims": list(p.dims), "probs": [float(x) for x in p.probs]}


def distribution_from_json(obj: dict) -> JointDistribution:
    if not isinstance(obj, dict) or "dims" not in obj or "probs" not in obj:
        raise DomainError('distribution JSON needs "dims" and "probs"')
    return JointDistribution(ProductDomain(tuple(obj["dims"])), obj["probs"])


def save_distribution(p: JointDistribution, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(distribution_to_json(p), fh)


def load_distribution(path: str) -> JointDistribution:
    with open(path) as fh:
        return distribution_from_json(json.load(fh))

"""Sampling distributions over components, mini-batch draws and seeding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_io import SmoothnessProfile

__all__ = [
    "SamplingDistribution",
    "build_distribution",
    "sample_minibatch",
    "sample_inner_length",
    "make_rng",
    "child_seed",
    "Reservoir",
]

SCHEMES = ("uniform", "importance")


@dataclass(frozen=True, eq=False)
class SamplingDistribution:
    q: np.ndarray
    scheme: str
    l_omega: float

    def __post_init__(self):
        q = np.asarray(self.q, dtype=np.float64)
        if q.ndim != 1 or q.size == 0:
            raise ValueError("q must be a nonempty vector")
        if np.any(q <= 0):
            raise ValueError("every sampling probability must be positive")
        if abs(q.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {q.sum()!r}, not 1")
        q.flags.writeable = False
        object.__setattr__(self, "q", q)
        cdf = np.cumsum(q)
        cdf[-1] = 1.0
        object.__setattr__(self, "_cdf", cdf)
        # 1 / (n q_i), the importance weight of each component in a gradient estimate
        object.__setattr__(self, "inv_nq", 1.0 / (q.size * q))

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def uniform(self) -> bool:
        return self.scheme == "uniform"


def build_distribution(profile: SmoothnessProfile, scheme: str = "uniform") -> SamplingDistribution:
    """Uniform q_i = 1/n, or importance q_i proportional to L_i.

    L_Omega = max_i L_i / (n q_i) is max L_i for uniform sampling and the mean
    of L_i for importance sampling.
    """
    L = np.asarray(profile.per_component, dtype=np.float64)
    n = L.size
    if np.any(L <= 0):
        raise ValueError("smoothness constants must be positive")
    scheme = scheme.lower()
    if scheme == "uniform":
        q = np.full(n, 1.0 / n)
    elif scheme == "importance":
        q = L / L.sum()
    else:
        raise ValueError(f"unknown sampling scheme {scheme!r}; expected one of {SCHEMES}")
    q = q / q.sum()
    l_omega = float(np.max(L / (n * q)))
    return SamplingDistribution(q, scheme, l_omega)


def sample_minibatch(dist: SamplingDistribution, b: int, rng: np.random.Generator):
    """b i.i.d. draws with replacement from q (0-based indices)."""
    if not 1 <= b <= dist.n:
        raise ValueError(f"batch size {b} outside [1, {dist.n}]")
    if dist.uniform:
        return rng.integers(0, dist.n, size=b)
    idx = np.searchsorted(dist._cdf, rng.random(b), side="right")
    return np.minimum(idx, dist.n - 1)


def sample_inner_length(m: int, rng: np.random.Generator) -> int:
    """Uniform draw from {1, ..., m}."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return int(rng.integers(1, m + 1))


def child_seed(parent_seed: int, run_index: int) -> int:
    """Deterministic per-run seed derived from a sweep seed."""
    ss = np.random.SeedSequence([int(parent_seed), int(run_index)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


class Reservoir:
    """Keeps one item chosen uniformly from everything offered so far (O(1) memory)."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.count = 0
        self.item = None

    def offer(self, item_factory):
        """Offer an item; ``item_factory`` is only called when the item is kept."""
        self.count += 1
        if self.count == 1 or self.rng.random() * self.count < 1.0:
            self.item = item_factory()
            return True
        return False

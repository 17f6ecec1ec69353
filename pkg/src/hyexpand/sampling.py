"""Sampling partitions, their overlap structure and refinement.

Intervals are half-open ``(a, b]``; ``(a, b]`` and ``(c, d]`` overlap iff
``a < d`` and ``c < b``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Partition",
    "SamplingScheme",
    "OverlapIndex",
    "generate_poisson",
    "generate_uniform",
    "partition_from_gaps",
    "mesh",
    "overlaps",
    "refine",
]


class Partition:
    """Strictly increasing breakpoints ``0 = t_0 < ... < t_N = T``."""

    __slots__ = ("breakpoints",)

    def __init__(self, breakpoints):
        bp = np.array(breakpoints, dtype=float)
        if bp.ndim != 1 or bp.size < 2:
            raise ValueError("a partition needs at least two breakpoints")
        if bp[0] != 0.0:
            raise ValueError("partition must start at 0")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        bp.setflags(write=False)
        self.breakpoints = bp

    @property
    def T(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def N(self) -> int:
        return self.breakpoints.size - 1

    @property
    def left(self) -> np.ndarray:
        return self.breakpoints[:-1]

    @property
    def right(self) -> np.ndarray:
        return self.breakpoints[1:]

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def __len__(self) -> int:
        return self.N

    def __eq__(self, other) -> bool:
        return isinstance(other, Partition) and np.array_equal(self.breakpoints, other.breakpoints)

    def __hash__(self) -> int:
        return hash(self.breakpoints.tobytes())

    def __repr__(self) -> str:
        return f"Partition(N={self.N}, T={self.T})"


@dataclass(frozen=True, eq=True)
class SamplingScheme:
    pi1: Partition
    pi2: Partition

    def __post_init__(self):
        if self.pi1.T != self.pi2.T:
            raise ValueError("both partitions must end at the same horizon T")

    @property
    def T(self) -> float:
        return self.pi1.T

    @property
    def N1(self) -> int:
        return self.pi1.N

    @property
    def N2(self) -> int:
        return self.pi2.N

    def swap(self) -> "SamplingScheme":
        return SamplingScheme(self.pi2, self.pi1)

    def to_json(self) -> str:
        return json.dumps({"pi1": self.pi1.breakpoints.tolist(),
                           "pi2": self.pi2.breakpoints.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "SamplingScheme":
        d = json.loads(text)
        return cls(Partition(d["pi1"]), Partition(d["pi2"]))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "SamplingScheme":
        return cls.from_json(Path(path).read_text())


def partition_from_gaps(gaps: np.ndarray, rate: float, T: float) -> Partition:
    """Accumulate exponential(1) gaps scaled by ``1/rate``, clipped at ``T``.

    Raises ``ValueError`` if ``gaps`` runs out before reaching ``T``.
    """
    times = np.cumsum(np.asarray(gaps, dtype=float) / rate)
    k = int(np.searchsorted(times, T, side="left"))
    if k == times.size:
        raise ValueError("not enough gaps to cover [0, T]")
    return Partition(np.concatenate([[0.0], times[:k], [T]]))


def _poisson_partition(rng: np.random.Generator, rate: float, T: float) -> Partition:
    pts: list[np.ndarray] = []
    t = 0.0
    block = max(16, int(rate * T + 6.0 * np.sqrt(rate * T + 1.0)))
    while True:
        times = t + np.cumsum(rng.standard_exponential(block) / rate)
        k = int(np.searchsorted(times, T, side="left"))
        pts.append(times[:k])
        if k < block:
            break
        t = float(times[-1])
    return Partition(np.concatenate([[0.0], *pts, [T]]))


def generate_poisson(n: int, p1: float, p2: float, T: float = 1.0,
                     seed=None) -> SamplingScheme:
    """Two independent Poisson partitions with intensities ``n p1`` and ``n p2``."""
    if n <= 0 or p1 <= 0 or p2 <= 0 or T <= 0:
        raise ValueError("n, p1, p2 and T must be positive")
    rng = np.random.default_rng(seed)
    return SamplingScheme(_poisson_partition(rng, n * p1, T),
                          _poisson_partition(rng, n * p2, T))


def generate_uniform(N: int, T: float = 1.0) -> Partition:
    if N < 1:
        raise ValueError("N must be at least 1")
    bp = np.linspace(0.0, T, N + 1)
    bp[-1] = T
    return Partition(bp)


def mesh(scheme: SamplingScheme) -> float:
    """Largest interval length over both partitions."""
    return float(max(scheme.pi1.lengths.max(), scheme.pi2.lengths.max()))


@dataclass(frozen=True)
class OverlapIndex:
    """CSR-like overlap structure.

    ``I_i`` overlaps ``J_j`` exactly for ``jlo[i] <= j < jhi[i]``, and
    symmetrically for ``ilo``/``ihi``. ``pair_i``, ``pair_j`` list the
    overlapping pairs ordered by ``i`` then ``j``; ``offset[i]`` points at the
    first pair of row ``i``.
    """

    jlo: np.ndarray
    jhi: np.ndarray
    ilo: np.ndarray
    ihi: np.ndarray
    offset: np.ndarray
    pair_i: np.ndarray
    pair_j: np.ndarray

    @property
    def n_pairs(self) -> int:
        return int(self.pair_i.size)

    def counts_per_i(self) -> np.ndarray:
        return self.jhi - self.jlo

    def counts_per_j(self) -> np.ndarray:
        return self.ihi - self.ilo

    def dense(self) -> np.ndarray:
        K = np.zeros((self.jlo.size, self.ilo.size), dtype=bool)
        K[self.pair_i, self.pair_j] = True
        return K


def _ranges(s: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # (s[i], s[i+1]] meets (t[j], t[j+1]] iff s[i] < t[j+1] and t[j] < s[i+1]
    lo = np.searchsorted(t[1:], s[:-1], side="right")
    hi = np.searchsorted(t[:-1], s[1:], side="left")
    return lo.astype(np.int64), hi.astype(np.int64)


def overlaps(scheme: SamplingScheme) -> OverlapIndex:
    s, t = scheme.pi1.breakpoints, scheme.pi2.breakpoints
    jlo, jhi = _ranges(s, t)
    ilo, ihi = _ranges(t, s)
    counts = jhi - jlo
    offset = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    pair_i = np.repeat(np.arange(s.size - 1, dtype=np.int64), counts)
    pair_j = np.arange(offset[-1], dtype=np.int64) - np.repeat(offset[:-1] - jlo, counts)
    return OverlapIndex(jlo, jhi, ilo, ihi, offset, pair_i, pair_j)


def _merge_runs(own: np.ndarray, other: np.ndarray) -> np.ndarray:
    """Merge consecutive intervals of ``own`` lying inside one interval of ``other``."""
    lo, hi = _ranges(own, other)
    single = (hi - lo) == 1
    host = np.where(single, lo, -1)
    keep = np.ones(own.size, dtype=bool)
    # interior breakpoint own[k] (1 <= k < N) separates intervals k-1 and k
    same = single[:-1] & single[1:] & (host[:-1] == host[1:])
    keep[1:-1] = ~same
    return own[keep]


def refine(scheme: SamplingScheme) -> SamplingScheme:
    """Coarsen each partition by merging runs of intervals inside one interval
    of the other partition.

    Afterwards every interval meets at most three intervals of the other
    partition, and the HY estimator is unchanged.
    """
    s, t = scheme.pi1.breakpoints, scheme.pi2.breakpoints
    return SamplingScheme(Partition(_merge_runs(s, t)), Partition(_merge_runs(t, s)))

"""Seeded k-means (k-means++ init, Lloyd iterations) over 2-D points."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import Point

_MASK64 = (1 << 64) - 1


class TooFewPoints(ValueError):
    pass


class SplitMix64:
    """splitmix64 generator; fixed algorithm so seeds reproduce everywhere."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def next_below(self, n: int) -> int:
        return self.next_u64() % n


def splitmix64_stream(seed: int, n: int) -> np.ndarray:
    """First ``n`` outputs of ``SplitMix64(seed)`` as uint64, vectorized."""
    with np.errstate(over="ignore"):
        i = np.arange(1, n + 1, dtype=np.uint64)
        z = np.uint64(seed & _MASK64) + i * np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


@dataclass(frozen=True)
class KMeansParams:
    k: int
    seed: int = 0
    max_iter: int = 100
    tol: float = 1e-4

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.tol < 0:
            raise ValueError(f"tol must be >= 0, got {self.tol}")


@dataclass(frozen=True)
class ClusterResult:
    centroids: list[Point]
    assignment: list[int]
    inertia: float
    n_iter: int
    inertia_history: list[float] = field(default_factory=list)


def _as_array(points) -> np.ndarray:
    if isinstance(points, np.ndarray):
        arr = np.asarray(points, dtype=np.float64)
    else:
        arr = np.array([(p.x, p.y) for p in points], dtype=np.float64).reshape(-1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected (n, 2) points, got shape {arr.shape}")
    return arr


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - c[None, :, :]
    return (diff * diff).sum(axis=2)


def kmeans_pp_init(x: np.ndarray, k: int, rng: SplitMix64) -> np.ndarray:
    n = len(x)
    centers = [x[rng.next_below(n)]]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        u = rng.next_float()
        if total > 0:
            cum = np.cumsum(d2)
            idx = int(np.searchsorted(cum, u * total, side="right"))
            idx = min(idx, n - 1)
        else:
            # every point already coincides with a center
            idx = int(u * n)
        centers.append(x[idx])
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(axis=1))
    return np.array(centers, dtype=np.float64)


def kmeans(points: Sequence[Point] | np.ndarray, p: KMeansParams) -> ClusterResult:
    """Cluster ``points`` into ``p.k`` groups.

    Deterministic for a fixed point order and parameter set. An empty
    cluster takes over the point lying farthest from its current centroid.
    """
    x = _as_array(points)
    n = len(x)
    if n < p.k:
        raise TooFewPoints(f"need at least k={p.k} points, got {n}")
    rng = SplitMix64(p.seed)
    centroids = kmeans_pp_init(x, p.k, rng)

    history: list[float] = []
    n_iter = 0
    for n_iter in range(1, p.max_iter + 1):
        d2 = _sq_dists(x, centroids)
        assign = np.argmin(d2, axis=1)
        _fill_empty(assign, d2, p.k)
        new = np.empty_like(centroids)
        for j in range(p.k):
            new[j] = x[assign == j].mean(axis=0)
        history.append(float(((x - new[assign]) ** 2).sum()))
        shift = np.sqrt(((new - centroids) ** 2).sum(axis=1)).max()
        centroids = new
        if shift < p.tol:
            break

    inertia = history[-1]
    return ClusterResult(
        centroids=[Point(float(cx), float(cy)) for cx, cy in centroids],
        assignment=[int(a) for a in assign],
        inertia=inertia,
        n_iter=n_iter,
        inertia_history=history,
    )


def _fill_empty(assign: np.ndarray, d2: np.ndarray, k: int) -> None:
    counts = np.bincount(assign, minlength=k)
    for j in range(k):
        if counts[j]:
            continue
        own = d2[np.arange(len(assign)), assign]
        # donors must not empty their own cluster
        own = np.where(counts[assign] > 1, own, -1.0)
        i = int(np.argmax(own))  # argmax returns the lowest index on ties
        counts[assign[i]] -= 1
        assign[i] = j
        counts[j] = 1

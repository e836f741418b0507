"""Gaussian summaries of point clusters and their closed-form aggregation.

Covariances use population normalisation, ``(1/n) sum (p - mu)(p - mu)^T``,
not the ``1/(n-1)`` sample estimator many point-cloud tools default to.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyInput
from .geometry import Pose, sorted_eigh_batch


@dataclass(frozen=True, eq=False)
class LocalStats:
    """Count, mean and normalised covariance of one cluster.

    The same container is used for world-frame summaries (``WorldStats``)
    and for the merged distribution of a feature (``AggregateStats``).
    """

    count: int
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        if int(self.count) < 1:
            raise ValueError("count must be >= 1")
        object.__setattr__(self, "count", int(self.count))
        mean = np.array(self.mean, dtype=float).reshape(3)
        cov = np.array(self.cov, dtype=float).reshape(3, 3)
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def total_count(self) -> int:
        return self.count

    def eigenvalues(self) -> np.ndarray:
        return sorted_eigh_batch(self.cov)[1]


WorldStats = LocalStats
AggregateStats = LocalStats


def compute_stats(points: np.ndarray) -> LocalStats:
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyInput("compute_stats needs at least one point")
    mu = pts.mean(axis=0)
    d = pts - mu
    cov = d.T @ d / len(pts)
    return LocalStats(len(pts), mu, 0.5 * (cov + cov.T))


def transform_stats(s: LocalStats, p: Pose) -> LocalStats:
    R = p.rotation
    cov = R @ s.cov @ R.T
    return LocalStats(s.count, R @ s.mean + p.translation, 0.5 * (cov + cov.T))


def aggregate(parts: Sequence[LocalStats]) -> LocalStats:
    """Merge world-frame summaries; cost is linear in ``len(parts)``."""
    if len(parts) == 0:
        raise EmptyInput("aggregate needs at least one part")
    counts = np.array([s.count for s in parts], dtype=float)
    means = np.stack([s.mean for s in parts])
    covs = np.stack([s.cov for s in parts])
    n = int(sum(s.count for s in parts))
    w = counts / counts.sum()
    mu = w @ means
    d = means - mu
    cov = np.einsum("k,kij->ij", w, covs) + np.einsum("k,ki,kj->ij", w, d, d)
    return LocalStats(n, mu, 0.5 * (cov + cov.T))


def smallest_eigenvalue(cov: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(cov)[0])


def weyl_gap(agg: LocalStats, parts: Sequence[LocalStats]) -> float:
    """``lambda3(agg) - sum_k (n_k / n) lambda3(part_k)``; never below round-off."""
    n = float(sum(s.count for s in parts))
    lower = sum(s.count / n * smallest_eigenvalue(s.cov) for s in parts)
    return smallest_eigenvalue(agg.cov) - lower

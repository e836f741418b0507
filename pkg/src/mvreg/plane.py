"""Plane estimation from aggregated statistics and the optimality-condition check."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateCluster
from .geometry import Pose, sorted_eigendecomposition
from .stats import LocalStats


@dataclass(frozen=True, eq=False)
class PlaneParam:
    normal: np.ndarray
    anchor: np.ndarray

    def __post_init__(self) -> None:
        n = np.array(self.normal, dtype=float).reshape(3)
        n = n / np.linalg.norm(n)
        a = np.array(self.anchor, dtype=float).reshape(3)
        n.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "anchor", a)

    @property
    def homogeneous(self) -> np.ndarray:
        """``[n, -n . mu]``: the plane as a 4-vector acting on homogeneous points."""
        return np.append(self.normal, -self.normal @ self.anchor)

    def distance(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.anchor) @ self.normal


def estimate_plane(agg: LocalStats) -> PlaneParam:
    """Normal = eigenvector of the smallest eigenvalue of the aggregate covariance."""
    if agg.count < 3:
        raise DegenerateCluster(f"need >= 3 points, got {agg.count}")
    eig = sorted_eigendecomposition(agg.cov)
    lam = eig.eigenvalues
    if not lam[1] > 1e-10 * lam[0]:
        raise DegenerateCluster("cluster is degenerate (second eigenvalue ~ 0)")
    return PlaneParam(eig.normal, agg.mean)


@dataclass(frozen=True)
class ConditionReport:
    angles: np.ndarray  # per frame, radians, sign-agnostic
    offsets: np.ndarray  # per pair (k < k'), |n . (mu_k - mu_k')|
    satisfied: bool

    @property
    def max_angle(self) -> float:
        return float(self.angles.max()) if self.angles.size else 0.0

    @property
    def max_offset(self) -> float:
        return float(self.offsets.max()) if self.offsets.size else 0.0


def _unsigned_angle(a: np.ndarray, b: np.ndarray) -> float:
    return math.atan2(float(np.linalg.norm(np.cross(a, b))), abs(float(a @ b)))


def check_optimal_conditions(
    poses: Sequence[Pose],
    locals: Sequence[LocalStats],
    plane: PlaneParam,
    tol_angle: float,
    tol_dist: float,
) -> ConditionReport:
    """Check that every frame's local normal, rotated to world, is parallel to
    the plane normal and that all world-frame cluster means share one offset.

    ``poses[i]`` is the pose of the frame that produced ``locals[i]``.
    """
    n = plane.normal
    angles = []
    world_means = []
    for pose, s in zip(poses, locals):
        local_normal = sorted_eigendecomposition(s.cov).normal
        angles.append(_unsigned_angle(pose.rotation @ local_normal, n))
        world_means.append(pose.rotation @ s.mean + pose.translation)
    proj = np.array(world_means) @ n if world_means else np.zeros(0)
    iu = np.triu_indices(len(proj), k=1)
    offsets = np.abs(proj[:, None] - proj[None, :])[iu]
    angles = np.array(angles)
    ok = bool(np.all(angles <= tol_angle) and np.all(offsets <= tol_dist))
    return ConditionReport(angles, offsets, ok)

"""Voxel-hash association: one feature per voxel, one observation per (voxel, frame).

Per-frame statistics are kept in the frame's local coordinates so pose
updates only ever re-transform summaries, never raw points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import LengthMismatch
from .geometry import Pose, sorted_eigh_batch
from .plane import PlaneParam
from .stats import LocalStats

VoxelKey = tuple[int, int, int]

# lambda2 / lambda1 below this is a line (or a point), not a plane
_COLLINEAR = 1e-10


def voxel_key(point: np.ndarray, resolution: float) -> VoxelKey:
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    k = np.floor(np.asarray(point, dtype=float) / resolution).astype(np.int64)
    return int(k[0]), int(k[1]), int(k[2])


def voxel_keys(points: np.ndarray, resolution: float) -> np.ndarray:
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    return np.floor(np.asarray(points, dtype=float) / resolution).astype(np.int64)


@dataclass
class VoxelCell:
    per_frame: dict[int, LocalStats] = field(default_factory=dict)
    active: bool = False
    plane: PlaneParam | None = None


@dataclass
class VoxelMap:
    resolution: float
    cells: dict[VoxelKey, VoxelCell] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.cells)

    def active_cells(self) -> list[tuple[VoxelKey, VoxelCell]]:
        return [(k, c) for k, c in sorted(self.cells.items()) if c.active]

    def total_count(self) -> int:
        return sum(s.count for c in self.cells.values() for s in c.per_frame.values())


def _group_stats(points: np.ndarray, inverse: np.ndarray, groups: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Two-pass per-group count, mean and population covariance."""
    counts = np.bincount(inverse, minlength=groups).astype(float)
    sums = np.zeros((groups, 3))
    np.add.at(sums, inverse, points)
    means = sums / counts[:, None]
    d = points - means[inverse]
    covs = np.zeros((groups, 3, 3))
    np.add.at(covs, inverse, d[:, :, None] * d[:, None, :])
    covs /= counts[:, None, None]
    return counts.astype(np.int64), means, covs


def build_map(clouds: Sequence[np.ndarray], poses: Sequence[Pose], resolution: float) -> VoxelMap:
    """Cast every cloud into the map using its initial pose."""
    if len(clouds) != len(poses):
        raise LengthMismatch(f"{len(clouds)} clouds vs {len(poses)} poses")
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    vmap = VoxelMap(float(resolution))
    for k, (cloud, pose) in enumerate(zip(clouds, poses)):
        pts = np.asarray(cloud, dtype=float).reshape(-1, 3)
        if len(pts) == 0:
            continue
        keys = voxel_keys(pose.apply(pts), resolution)
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        counts, means, covs = _group_stats(pts, inverse, len(uniq))
        for key, c, m, s in zip(map(tuple, uniq.tolist()), counts, means, covs):
            cell = vmap.cells.setdefault(key, VoxelCell())
            cell.per_frame[k] = LocalStats(int(c), m, 0.5 * (s + s.T))
    return vmap


def filter_active(
    vmap: VoxelMap, min_points: int = 10, planarity_ratio: float = 0.1, min_frames: int = 2
) -> VoxelMap:
    """Keep per-frame entries that are populated and planar; mark cells with
    at least ``min_frames`` such entries active.  Returns a new map."""
    if min_points <= 0 or planarity_ratio <= 0 or min_frames <= 0:
        raise ValueError("thresholds must be positive")
    out = VoxelMap(vmap.resolution)
    for key, cell in vmap.cells.items():
        frames = sorted(cell.per_frame)
        kept: dict[int, LocalStats] = {}
        if frames:
            covs = np.stack([cell.per_frame[f].cov for f in frames])
            lam = sorted_eigh_batch(covs)[1]
            for f, l in zip(frames, lam):
                s = cell.per_frame[f]
                if s.count >= min_points and l[1] > _COLLINEAR * l[0] and l[2] <= planarity_ratio * l[1]:
                    kept[f] = s
        out.cells[key] = VoxelCell(kept, len(kept) >= min_frames, None)
    return out

"""End-to-end voxel-based multiview registration."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import ConfigError, LengthMismatch, NoActiveVoxels
from .geometry import Pose
from .objective import FeatureObservation
from .plane import PlaneParam
from .solver import Problem, SolveReport, SolverConfig, feature_planes, solve
from .voxelmap import VoxelMap, build_map, filter_active, voxel_keys

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    voxel_resolution: float = 1.0
    min_points: int = 10
    planarity_ratio: float = 0.1
    min_frames: int = 2
    max_iters: int = 100
    rel_tol: float = 1e-8
    step_tol: float = 1e-10
    downsample_resolution: float | None = None
    fix_frame: int = 0
    damping_init: float = 1e-4
    damping_up: float = 4.0
    damping_down: float = 0.5

    def __post_init__(self) -> None:
        if not self.voxel_resolution > 0:
            raise ConfigError("voxel_resolution must be > 0")
        if self.min_points < 1 or self.min_frames < 1:
            raise ConfigError("min_points and min_frames must be >= 1")
        if not self.planarity_ratio > 0:
            raise ConfigError("planarity_ratio must be > 0")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if self.downsample_resolution is not None and not self.downsample_resolution > 0:
            raise ConfigError("downsample_resolution must be > 0 or null")
        if self.fix_frame < 0:
            raise ConfigError("fix_frame must be >= 0")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> PipelineConfig:
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path: str | Path) -> PipelineConfig:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            max_iters=self.max_iters,
            rel_tol=self.rel_tol,
            step_tol=self.step_tol,
            damping_init=self.damping_init,
            damping_up=self.damping_up,
            damping_down=self.damping_down,
        )


def downsample(cloud: np.ndarray, resolution: float) -> np.ndarray:
    """Voxel-grid downsampling: one centroid per occupied voxel, ordered by voxel key."""
    pts = np.asarray(cloud, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        return pts.copy()
    keys = voxel_keys(pts, resolution)
    _, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    counts = np.bincount(inverse).astype(float)
    sums = np.zeros((len(counts), 3))
    np.add.at(sums, inverse, pts)
    return sums / counts[:, None]


def problem_from_map(vmap: VoxelMap, poses: Sequence[Pose], fix_frame: int = 0) -> Problem:
    features = [
        [FeatureObservation.from_stats(k, cell.per_frame[k]) for k in sorted(cell.per_frame)]
        for _, cell in vmap.active_cells()
    ]
    if not features:
        raise NoActiveVoxels("no voxel passed the activity checks")
    return Problem(list(poses), features, {fix_frame})


@dataclass
class RegistrationResult:
    poses: list[Pose]
    report: SolveReport
    planes: list[PlaneParam]
    voxel_map: VoxelMap

    def __iter__(self):
        # allows `poses, report = register(...)`
        return iter((self.poses, self.report))


def register(
    clouds: Sequence[np.ndarray], initial_poses: Sequence[Pose], cfg: PipelineConfig | None = None
) -> RegistrationResult:
    cfg = cfg or PipelineConfig()
    if len(clouds) != len(initial_poses):
        raise LengthMismatch(f"{len(clouds)} clouds vs {len(initial_poses)} poses")
    if len(clouds) < 2:
        raise LengthMismatch("registration needs at least two clouds")
    if cfg.fix_frame >= len(clouds):
        raise ConfigError(f"fix_frame {cfg.fix_frame} out of range for {len(clouds)} clouds")
    if cfg.downsample_resolution is not None:
        clouds = [downsample(c, cfg.downsample_resolution) for c in clouds]
    vmap = build_map(clouds, initial_poses, cfg.voxel_resolution)
    vmap = filter_active(vmap, cfg.min_points, cfg.planarity_ratio, cfg.min_frames)
    problem = problem_from_map(vmap, initial_poses, cfg.fix_frame)
    log.info("%d active voxels of %d", len(problem.features), len(vmap))
    poses, report = solve(problem, cfg.solver_config())
    planes = feature_planes(problem, poses)
    for (_, cell), plane in zip(vmap.active_cells(), planes):
        cell.plane = plane
    return RegistrationResult(poses, report, planes, vmap)

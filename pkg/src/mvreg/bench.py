"""Benchmark trials and timing harnesses shared by the CLI and scripts."""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from .errors import ConfigError
from .geometry import Pose, sorted_eigh_batch
from .metrics import ape, rpe
from .simulator import SceneConfig, generate_scene, perturb_poses, scene_problem
from .solver import OBJECTIVES, Problem, SolverConfig, StackedObservations, solve

CSV_COLUMNS = [
    "num_poses", "num_planes", "sigma", "points_per_plane", "seed", "objective",
    "rpe_trans", "rpe_rot", "ape_trans", "iterations", "converged",
    "final_cost", "wall_time", "time_per_iter", "residual_eval_time",
]  # fmt: skip


def _stack(poses: Sequence[Pose]) -> tuple[np.ndarray, np.ndarray]:
    return np.stack([p.rotation for p in poses]), np.stack([p.translation for p in poses])


class RawPointPath:
    """Point-wise evaluation: planes from raw world points, one residual per point.

    This is the cost model of methods that never summarise clusters; every
    evaluation touches every point.
    """

    def __init__(self, scene_clouds: Sequence[np.ndarray], associations: dict[tuple[int, int, int], int]):
        items = sorted(associations.items(), key=lambda kv: (kv[1], kv[0]))
        pts, kid, fid = [], [], []
        for (k, a, b), j in items:
            pts.append(scene_clouds[k][a:b])
            kid.append(np.full(b - a, k))
            fid.append(np.full(b - a, j))
        self.points = np.vstack(pts)
        self.kid = np.concatenate(kid)
        self.fid = np.concatenate(fid)
        self.num_frames = int(self.kid.max()) + 1
        self.num_features = int(self.fid.max()) + 1
        self.starts = np.flatnonzero(np.r_[True, self.fid[1:] != self.fid[:-1]])
        self.sizes = np.diff(np.r_[self.starts, len(self.fid)])

    def evaluate(self, R: np.ndarray, t: np.ndarray) -> tuple[float, np.ndarray]:
        Rk = R[self.kid]
        world = np.einsum("mij,mj->mi", Rk, self.points) + t[self.kid]
        mu = np.add.reduceat(world, self.starts) / self.sizes[:, None]
        d = world - mu[self.fid]
        cov = np.add.reduceat(d[:, :, None] * d[:, None, :], self.starts) / self.sizes[:, None, None]
        normals = sorted_eigh_batch(cov)[0][:, :, 2]
        n = normals[self.fid]
        r = np.einsum("mi,mi->m", n, d)
        n_loc = np.einsum("mji,mj->mi", Rk, n)
        J = np.empty((len(r), 6))
        J[:, :3] = np.cross(self.points, n_loc)
        J[:, 3:] = n_loc
        H = np.zeros((self.num_frames, 6, 6))
        np.add.at(H, self.kid, J[:, :, None] * J[:, None, :])
        return float(r @ r), H


def proposed_iteration(stacked: StackedObservations, R: np.ndarray, t: np.ndarray) -> tuple[float, np.ndarray]:
    """One plane refresh plus residual/Jacobian/normal-equation build from statistics."""
    normals, anchors = stacked.planes(R, t)
    r, J = stacked.residuals(R, t, normals, anchors, "proposed")
    H = np.zeros((int(stacked.kid.max()) + 1, 6, 6))
    np.add.at(H, stacked.kid, np.einsum("mri,mrj->mij", J, J))
    return float(np.sum(r * r)), H


def best_time(fn: Callable[[], Any], repeats: int = 7) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


@dataclass(frozen=True)
class Trial:
    num_poses: int
    num_planes: int
    sigma: float
    points_per_plane: int
    seed: int
    objective: str
    rot_sigma: float
    trans_sigma: float
    max_iters: int


def run_trial(trial: Trial) -> dict[str, Any]:
    scene = generate_scene(
        SceneConfig(trial.num_poses, trial.num_planes, trial.points_per_plane, trial.sigma, seed=trial.seed)
    )
    init = perturb_poses(scene.gt_poses, trial.rot_sigma, trial.trans_sigma, trial.seed + 1_000_003)
    problem: Problem = scene_problem(scene, init)
    poses, report = solve(problem, SolverConfig(max_iters=trial.max_iters, objective=trial.objective))
    R, t = _stack(init)
    if trial.objective == "proposed":
        stacked = StackedObservations(problem.features)
        eval_time = best_time(lambda: proposed_iteration(stacked, R, t), 3)
    else:
        raw = RawPointPath(scene.clouds, scene.associations)
        eval_time = best_time(lambda: raw.evaluate(R, t), 3)
    rp = rpe(poses, scene.gt_poses)
    return {
        "num_poses": trial.num_poses,
        "num_planes": trial.num_planes,
        "sigma": trial.sigma,
        "points_per_plane": trial.points_per_plane,
        "seed": trial.seed,
        "objective": trial.objective,
        "rpe_trans": rp.mean_trans,
        "rpe_rot": rp.mean_rot,
        "ape_trans": ape(poses, scene.gt_poses).mean,
        "iterations": report.iterations,
        "converged": report.converged,
        "final_cost": report.final_cost,
        "wall_time": report.wall_time,
        "time_per_iter": report.wall_time / max(report.iterations, 1),
        "residual_eval_time": eval_time,
    }


def _as_list(value: Any, name: str, kind: type) -> list:
    values = value if isinstance(value, list) else [value]
    if not values:
        raise ConfigError(f"grid axis {name!r} is empty")
    out = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float) if kind is float else kind):
            raise ConfigError(f"grid axis {name!r} has invalid entry {v!r}")
        out.append(kind(v))
    return out


GRID_KEYS = {
    "num_poses", "num_planes", "sigma", "points_per_plane", "objective",
    "rot_sigma_deg", "trans_sigma", "max_iters",
}  # fmt: skip


def expand_grid(grid: dict[str, Any], seeds: int) -> list[Trial]:
    """Cartesian product of the grid axes, times seeds, times objectives."""
    if not isinstance(grid, dict):
        raise ConfigError("grid must be a JSON object")
    unknown = set(grid) - GRID_KEYS
    if unknown:
        raise ConfigError(f"unknown grid keys: {', '.join(sorted(unknown))}")
    for key in ("num_poses", "num_planes", "sigma"):
        if key not in grid:
            raise ConfigError(f"grid is missing {key!r}")
    poses = _as_list(grid["num_poses"], "num_poses", int)
    planes = _as_list(grid["num_planes"], "num_planes", int)
    sigmas = _as_list(grid["sigma"], "sigma", float)
    ppp = _as_list(grid.get("points_per_plane", 50), "points_per_plane", int)
    objectives = _as_list(grid.get("objective", list(OBJECTIVES)), "objective", str)
    if any(o not in OBJECTIVES for o in objectives):
        raise ConfigError(f"objective must be among {OBJECTIVES}")
    if min(poses) < 2 or min(planes) < 1 or min(ppp) < 3 or min(sigmas) < 0:
        raise ConfigError("grid values out of range")
    rot = np.deg2rad(float(grid.get("rot_sigma_deg", 5.0)))
    trans = float(grid.get("trans_sigma", 0.1))
    max_iters = int(grid.get("max_iters", 100))
    if seeds < 1 or max_iters < 1:
        raise ConfigError("seeds and max_iters must be >= 1")
    return [
        Trial(n, m, s, p, seed, obj, rot, trans, max_iters)
        for n, m, s, p in itertools.product(poses, planes, sigmas, ppp)
        for seed in range(seeds)
        for obj in objectives
    ]

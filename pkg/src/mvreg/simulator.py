"""Monte-Carlo scenes: random poses observing random planar patches.

Random numbers come from numpy's PCG64 bit generator seeded with the scene
seed, so a (config, seed) pair reproduces the same scene on any machine.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .geometry import Pose, exp_se3, random_rotation
from .objective import FeatureObservation
from .plane import PlaneParam
from .solver import Problem
from .stats import compute_stats

RNG_ALGORITHM = "PCG64"


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class SceneConfig:
    num_poses: int = 10
    num_planes: int = 30
    points_per_plane_per_frame: int = 50
    noise_sigma: float = 0.0
    pose_box: float = 2.0
    plane_extent: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.num_poses, self.num_planes, self.points_per_plane_per_frame) < 1:
            raise ValueError("scene counts must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.pose_box < 0 or self.plane_extent <= 0:
            raise ValueError("pose_box must be >= 0 and plane_extent > 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Scene:
    config: SceneConfig
    gt_poses: list[Pose]
    planes: list[PlaneParam]
    clouds: list[np.ndarray]  # per frame, local coordinates
    # (frame, start, stop) -> plane index; rows [start, stop) of clouds[frame]
    associations: dict[tuple[int, int, int], int]

    def observations(self, frame: int) -> list[tuple[int, np.ndarray]]:
        return [
            (plane, self.clouds[f][a:b])
            for (f, a, b), plane in sorted(self.associations.items())
            if f == frame
        ]


def _tangent_basis(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    helper = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(n, helper)
    u /= np.linalg.norm(u)
    return u, np.cross(n, u)


def generate_scene(cfg: SceneConfig) -> Scene:
    rng = make_rng(cfg.seed)
    poses = [
        Pose(random_rotation(rng), rng.uniform(-cfg.pose_box, cfg.pose_box, 3))
        for _ in range(cfg.num_poses)
    ]
    planes = []
    for _ in range(cfg.num_planes):
        n = rng.standard_normal(3)
        n /= np.linalg.norm(n)
        planes.append(PlaneParam(n, rng.uniform(-2 * cfg.pose_box, 2 * cfg.pose_box, 3)))
    bases = [_tangent_basis(p.normal) for p in planes]

    m = cfg.points_per_plane_per_frame
    clouds = []
    assoc = {}
    for k, pose in enumerate(poses):
        inv = pose.inverse()
        chunks = []
        for j, (plane, (u, v)) in enumerate(zip(planes, bases)):
            ab = rng.uniform(-cfg.plane_extent, cfg.plane_extent, (m, 2))
            noise = rng.standard_normal(m) * cfg.noise_sigma
            world = plane.anchor + ab[:, :1] * u + ab[:, 1:] * v + noise[:, None] * plane.normal
            chunks.append(inv.apply(world))
            assoc[(k, j * m, (j + 1) * m)] = j
        clouds.append(np.vstack(chunks))
    return Scene(cfg, poses, planes, clouds, assoc)


def perturb_poses(
    poses: Sequence[Pose], rot_sigma: float, trans_sigma: float, seed: int
) -> list[Pose]:
    """Right-multiply every pose but the first by ``exp`` of a Gaussian twist."""
    if rot_sigma < 0 or trans_sigma < 0:
        raise ValueError("sigmas must be >= 0")
    rng = make_rng(seed)
    out = [poses[0]] if poses else []
    for p in poses[1:]:
        xi = np.concatenate([rng.standard_normal(3) * rot_sigma, rng.standard_normal(3) * trans_sigma])
        out.append(p.retract(xi))
    return out


def scene_problem(scene: Scene, init_poses: Sequence[Pose] | None = None) -> Problem:
    """Problem with the scene's known associations (one feature per plane)."""
    features: list[list[FeatureObservation]] = [[] for _ in scene.planes]
    for (k, a, b), j in sorted(scene.associations.items()):
        features[j].append(FeatureObservation.from_stats(k, compute_stats(scene.clouds[k][a:b])))
    poses = list(scene.gt_poses if init_poses is None else init_poses)
    return Problem(poses, features, {0})

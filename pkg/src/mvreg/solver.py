"""Levenberg-Marquardt over per-frame pose twists with per-iteration plane refresh.

Each outer iteration re-estimates every feature plane from the aggregated
statistics under the current poses, builds residuals and Jacobians with the
planes held constant, and takes one damped Gauss-Newton step.  With planes
constant, every residual depends on a single frame, so the normal equations
are block diagonal and are solved as independent 6x6 systems.

Gauge: by default every frame is stepped and the whole trajectory is then
re-anchored by one rigid transform so that the anchor frame keeps its input
pose ("reanchor").  Removing the anchor frame's block instead ("remove")
leaves the free frames chasing planes that average in the fixed frame, which
contracts the shared error by only (N-1)/N per iteration.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidProblem, SingularNormalEquations
from .geometry import Pose, sorted_eigh_batch
from .objective import FeatureObservation, pivoted_cholesky, scatter_from_stats
from .plane import PlaneParam

log = logging.getLogger(__name__)

OBJECTIVES = ("proposed", "ef_lm")


@dataclass
class SolverConfig:
    max_iters: int = 100
    rel_tol: float = 1e-8
    step_tol: float = 1e-10
    damping_init: float = 1e-4
    damping_up: float = 4.0
    damping_down: float = 0.5
    damping_max: float = 1e8
    objective: str = "proposed"
    gauge: str = "reanchor"

    def __post_init__(self) -> None:
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.gauge not in ("reanchor", "remove"):
            raise ValueError(f"unknown gauge mode {self.gauge!r}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class Problem:
    poses: list[Pose]
    features: list[list[FeatureObservation]]
    fixed_frames: set[int] = field(default_factory=lambda: {0})

    def validate(self) -> None:
        if not self.fixed_frames:
            raise InvalidProblem("at least one frame must be fixed")
        n = len(self.poses)
        if any(not 0 <= k < n for k in self.fixed_frames):
            raise InvalidProblem("fixed frame index out of range")
        if not all(np.all(np.isfinite(p.matrix())) for p in self.poses):
            raise InvalidProblem("initial poses must be finite")
        if not self.features:
            raise InvalidProblem("problem has no features")
        for feat in self.features:
            if not feat:
                raise InvalidProblem("feature without observations")
            for o in feat:
                if not 0 <= o.frame_id < n:
                    raise InvalidProblem(f"observation references frame {o.frame_id}, have {n}")


@dataclass
class SolveReport:
    iterations: int
    initial_cost: float
    final_cost: float
    converged: bool
    cost_trace: list[float]
    wall_time: float
    termination: str = ""
    objective: str = "proposed"

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "initial_cost": self.initial_cost,
            "final_cost": self.final_cost,
            "converged": self.converged,
            "cost_trace": list(self.cost_trace),
            "wall_time": self.wall_time,
            "termination": self.termination,
            "objective": self.objective,
        }


class StackedObservations:
    """All observations of a problem as contiguous arrays, grouped by feature."""

    def __init__(self, features: Sequence[Sequence[FeatureObservation]], with_scatter: bool = False):
        obs = [o for feat in features for o in feat]
        sizes = np.array([len(feat) for feat in features])
        self.num_features = len(features)
        self.starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        self.fid = np.repeat(np.arange(len(features)), sizes)
        self.kid = np.array([o.frame_id for o in obs], dtype=int)
        self.count = np.array([o.stats.count for o in obs], dtype=float)
        self.mean = np.stack([o.stats.mean for o in obs])
        self.cov = np.stack([o.stats.cov for o in obs])
        self.basis = np.stack([o.basis.rotation_basis for o in obs])
        self.weights = np.stack([o.weights for o in obs])
        total = np.add.reduceat(self.count, self.starts)
        self.frac = self.count / total[self.fid]
        self.factor = (
            np.stack([pivoted_cholesky(scatter_from_stats(o.stats)) for o in obs]) if with_scatter else None
        )

    def world(self, R: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        Rk = R[self.kid]
        return Rk, np.einsum("mij,mj->mi", Rk, self.mean) + t[self.kid]

    def planes(self, R: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Closed-form aggregation per feature; returns (normals, anchors)."""
        Rk, mu_w = self.world(R, t)
        cov_w = Rk @ self.cov @ Rk.transpose(0, 2, 1)
        mu = np.add.reduceat(self.frac[:, None] * mu_w, self.starts)
        d = mu_w - mu[self.fid]
        spread = cov_w + d[:, :, None] * d[:, None, :]
        S = np.add.reduceat(self.frac[:, None, None] * spread, self.starts)
        V, _ = sorted_eigh_batch(0.5 * (S + S.transpose(0, 2, 1)))
        return V[:, :, 2], mu

    def residuals(
        self, R: np.ndarray, t: np.ndarray, normals: np.ndarray, anchors: np.ndarray, objective: str,
        jacobian: bool = True,
    ) -> tuple[np.ndarray, np.ndarray | None]:
        Rk, mu_w = self.world(R, t)
        n = normals[self.fid]
        n_loc = np.einsum("mji,mj->mi", Rk, n)
        if objective == "proposed":
            ex, ey = self.basis[:, :, 0], self.basis[:, :, 1]
            w = self.weights
            r = np.stack(
                [
                    w[:, 0] * np.einsum("mi,mi->m", n_loc, ex),
                    w[:, 1] * np.einsum("mi,mi->m", n_loc, ey),
                    w[:, 2] * np.einsum("mi,mi->m", n, mu_w - anchors[self.fid]),
                ],
                axis=1,
            )
            if not jacobian:
                return r, None
            J = np.zeros((len(r), 3, 6))
            J[:, 0, :3] = w[:, :1] * np.cross(ex, n_loc)
            J[:, 1, :3] = w[:, 1:2] * np.cross(ey, n_loc)
            J[:, 2, :3] = w[:, 2:] * np.cross(self.mean, n_loc)
            J[:, 2, 3:] = w[:, 2:] * n_loc
            return r, J
        # ef_lm
        v = np.empty((len(n), 4))
        v[:, :3] = n_loc
        v[:, 3] = np.einsum("mi,mi->m", n, t[self.kid] - anchors[self.fid])
        r = np.einsum("mji,mj->mi", self.factor, v)
        if not jacobian:
            return r, None
        dv = np.zeros((len(n), 4, 6))
        x, y, z = n_loc[:, 0], n_loc[:, 1], n_loc[:, 2]
        dv[:, 0, 1], dv[:, 0, 2] = -z, y
        dv[:, 1, 0], dv[:, 1, 2] = z, -x
        dv[:, 2, 0], dv[:, 2, 1] = -y, x
        dv[:, 3, 3:] = n_loc
        J = np.einsum("mji,mjk->mik", self.factor, dv)
        return r, J


def _stack_poses(poses: Sequence[Pose]) -> tuple[np.ndarray, np.ndarray]:
    return np.stack([p.rotation for p in poses]), np.stack([p.translation for p in poses])


def feature_planes(problem: Problem, poses: Sequence[Pose] | None = None) -> list[PlaneParam]:
    """Planes re-estimated from aggregated statistics under ``poses``."""
    stacked = StackedObservations(problem.features)
    R, t = _stack_poses(problem.poses if poses is None else poses)
    normals, anchors = stacked.planes(R, t)
    return [PlaneParam(n, a) for n, a in zip(normals, anchors)]


def problem_cost(problem: Problem, poses: Sequence[Pose] | None = None, objective: str = "proposed") -> float:
    stacked = StackedObservations(problem.features, with_scatter=objective == "ef_lm")
    R, t = _stack_poses(problem.poses if poses is None else poses)
    normals, anchors = stacked.planes(R, t)
    r, _ = stacked.residuals(R, t, normals, anchors, objective, jacobian=False)
    return float(np.sum(r * r))


def solve(problem: Problem, cfg: SolverConfig | None = None) -> tuple[list[Pose], SolveReport]:
    cfg = cfg or SolverConfig()
    problem.validate()
    start = time.perf_counter()
    N = len(problem.poses)
    stacked = StackedObservations(problem.features, with_scatter=cfg.objective == "ef_lm")
    anchor = min(problem.fixed_frames)
    frozen = np.zeros(N, dtype=bool)
    frozen[list(problem.fixed_frames)] = True
    # re-anchoring would drag any further fixed frames along with it
    reanchor = cfg.gauge == "reanchor" and len(problem.fixed_frames) == 1
    if reanchor:
        frozen[anchor] = False
    anchor_pose = problem.poses[anchor]

    poses = list(problem.poses)

    def evaluate(ps: list[Pose], jacobian: bool):
        R, t = _stack_poses(ps)
        normals, anchors = stacked.planes(R, t)
        r, J = stacked.residuals(R, t, normals, anchors, cfg.objective, jacobian)
        return float(np.sum(r * r)), r, J

    cost, r, J = evaluate(poses, True)
    initial_cost = cost
    trace = [cost]
    mu = cfg.damping_init
    converged = False
    termination = "max_iters"
    iterations = 0

    for it in range(1, cfg.max_iters + 1):
        iterations = it
        H = np.zeros((N, 6, 6))
        g = np.zeros((N, 6))
        np.add.at(H, stacked.kid, np.einsum("mri,mrj->mij", J, J))
        np.add.at(g, stacked.kid, np.einsum("mri,mr->mi", J, r))
        diag = np.diagonal(H, axis1=1, axis2=2)
        floor = 1e-12 * max(float(diag.mean()), 1e-300)
        D = np.maximum(diag, floor)

        while True:
            A = H + mu * D[:, :, None] * np.eye(6)
            try:
                delta = -np.linalg.solve(A, g[:, :, None])[:, :, 0]
            except np.linalg.LinAlgError as exc:
                raise SingularNormalEquations(str(exc)) from exc
            if not np.all(np.isfinite(delta)):
                raise SingularNormalEquations("non-finite step")
            delta[frozen] = 0.0
            step_norm = float(np.linalg.norm(delta))
            if step_norm < cfg.step_tol:
                converged, termination = True, "step_tol"
                break
            cand = [p.retract(d) for p, d in zip(poses, delta)]
            if reanchor:
                G = anchor_pose.compose(cand[anchor].inverse())
                cand = [G.compose(p) for p in cand]
                cand[anchor] = anchor_pose
            new_cost, new_r, new_J = evaluate(cand, True)
            if new_cost <= cost:
                rel = (cost - new_cost) / cost if cost > 0 else 0.0
                poses, cost, r, J = cand, new_cost, new_r, new_J
                trace.append(cost)
                mu = max(mu * cfg.damping_down, 1e-15)
                if rel < cfg.rel_tol:
                    converged, termination = True, "rel_tol"
                break
            # rejected
            if (new_cost - cost) <= cfg.rel_tol * cost:
                converged, termination = True, "no_progress"
                break
            mu *= cfg.damping_up
            if mu > cfg.damping_max:
                raise SingularNormalEquations(f"damping exceeded {cfg.damping_max:g} without a cost decrease")
        if converged:
            break
        log.debug("iter %d cost %.6e damping %.2e", it, cost, mu)

    report = SolveReport(
        iterations=iterations,
        initial_cost=initial_cost,
        final_cost=cost,
        converged=converged,
        cost_trace=trace,
        wall_time=time.perf_counter() - start,
        termination=termination,
        objective=cfg.objective,
    )
    return poses, report

"""Residuals and Jacobians for the eigenvalue-weighted planar objective, the
Cholesky least-squares Eigen-Factor baseline (EF(LM)), and the eigenvalue
cost used as a verification oracle.

All Jacobians are with respect to a right-perturbation twist
``[d_omega, d_rho]`` of the observing frame's pose.  Plane parameters are
constants inside one solver step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CholeskyFailure, EmptyInput
from .geometry import EigenDecomp, Pose, hat, sorted_eigendecomposition
from .plane import PlaneParam
from .stats import LocalStats, smallest_eigenvalue


@dataclass(frozen=True, eq=False)
class FeatureObservation:
    """One frame's view of one feature, decomposed once before solving."""

    frame_id: int
    stats: LocalStats
    basis: EigenDecomp
    weights: np.ndarray  # sqrt(n lambda1), sqrt(n lambda2), sqrt(n)

    @classmethod
    def from_stats(cls, frame_id: int, stats: LocalStats) -> FeatureObservation:
        basis = sorted_eigendecomposition(stats.cov)
        lam = np.clip(basis.eigenvalues, 0.0, None)
        w = np.sqrt(stats.count * np.array([lam[0], lam[1], 1.0]))
        return cls(int(frame_id), stats, basis, w)

    def scatter_factor(self) -> np.ndarray:
        return pivoted_cholesky(scatter_from_stats(self.stats))


@dataclass(frozen=True, eq=False)
class ResidualBlock:
    frame_id: int
    residual: np.ndarray
    jacobian: np.ndarray

    @property
    def cost(self) -> float:
        return float(self.residual @ self.residual)


def proposed_residual(obs: FeatureObservation, pose: Pose, plane: PlaneParam) -> ResidualBlock:
    R, t = pose.rotation, pose.translation
    n, mu = plane.normal, plane.anchor
    w1, w2, w3 = obs.weights
    ex = obs.basis.rotation_basis[:, 0]
    ey = obs.basis.rotation_basis[:, 1]
    mu_l = obs.stats.mean
    n_loc = R.T @ n
    r = np.array(
        [
            w1 * (n_loc @ ex),
            w2 * (n_loc @ ey),
            w3 * (n @ (R @ mu_l + t - mu)),
        ]
    )
    J = np.zeros((3, 6))
    J[0, :3] = w1 * np.cross(ex, n_loc)
    J[1, :3] = w2 * np.cross(ey, n_loc)
    J[2, :3] = w3 * np.cross(mu_l, n_loc)
    J[2, 3:] = w3 * n_loc
    return ResidualBlock(obs.frame_id, r, J)


def evm_cost(agg: LocalStats) -> float:
    """Smallest eigenvalue of the aggregate covariance."""
    return max(smallest_eigenvalue(agg.cov), 0.0)


def lemma1_rhs(points_per_frame: Sequence[tuple[Pose, np.ndarray]], plane: PlaneParam) -> float:
    """Mean squared point-to-plane distance over all world points."""
    total = 0.0
    count = 0
    for pose, pts in points_per_frame:
        d = plane.distance(pose.apply(np.asarray(pts, dtype=float).reshape(-1, 3)))
        total += float(d @ d)
        count += len(d)
    return total / count


def build_homogeneous_scatter(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyInput("scatter needs at least one point")
    P = np.hstack([pts, np.ones((len(pts), 1))])
    S = P.T @ P
    return 0.5 * (S + S.T)


def scatter_from_stats(s: LocalStats) -> np.ndarray:
    """Homogeneous scatter rebuilt from count, mean and covariance."""
    mu = s.mean
    S = np.empty((4, 4))
    S[:3, :3] = s.cov + np.outer(mu, mu)
    S[:3, 3] = mu
    S[3, :3] = mu
    S[3, 3] = 1.0
    return s.count * S


def pivoted_cholesky(S: np.ndarray, rel_tol: float = 1e-10) -> np.ndarray:
    """Factor ``F`` with ``F @ F.T == S`` for a PSD, possibly singular ``S``.

    Diagonal pivoting; factorisation stops once the largest remaining pivot
    is below ``rel_tol * trace(S)``.  ``F`` is lower-triangular up to the
    row permutation chosen by the pivoting.
    """
    S = np.asarray(S, dtype=float)
    m = S.shape[0]
    A = 0.5 * (S + S.T)
    trace = float(np.trace(A))
    if trace < 0 or not np.all(np.isfinite(A)):
        raise CholeskyFailure("matrix is not positive semi-definite")
    tol = rel_tol * trace
    neg_tol = 1e-9 * max(trace, 1e-300)
    if float(np.diag(A).min()) < -neg_tol:
        raise CholeskyFailure("negative diagonal entry")
    A = A.copy()
    L = np.zeros((m, m))
    perm = np.arange(m)
    for k in range(m):
        j = k + int(np.argmax(np.diag(A)[k:]))
        if A[j, j] <= tol:
            rest = A[k:, k:]
            if rest.size and float(np.abs(rest).max()) > neg_tol:
                if float(np.linalg.eigvalsh(rest)[0]) < -neg_tol:
                    raise CholeskyFailure("matrix is not positive semi-definite")
            break
        if j != k:
            A[[k, j], :] = A[[j, k], :]
            A[:, [k, j]] = A[:, [j, k]]
            L[[k, j], :k] = L[[j, k], :k]
            perm[[k, j]] = perm[[j, k]]
        piv = np.sqrt(A[k, k])
        L[k, k] = piv
        L[k + 1 :, k] = A[k + 1 :, k] / piv
        A[k + 1 :, k + 1 :] -= np.outer(L[k + 1 :, k], L[k + 1 :, k])
    F = np.empty_like(L)
    F[perm] = L
    return F


def ef_lm_residual(
    scatter_chol: np.ndarray, pose: Pose, plane_h: np.ndarray, frame_id: int = 0
) -> ResidualBlock:
    """``F^T T^T eta``: squared norm equals ``eta^T T S T^T eta``."""
    R, t = pose.rotation, pose.translation
    eta = np.asarray(plane_h, dtype=float)
    n, d = eta[:3], eta[3]
    n_loc = R.T @ n
    v = np.append(n_loc, n @ t + d)
    dv = np.zeros((4, 6))
    dv[:3, :3] = hat(n_loc)
    dv[3, 3:] = n_loc
    F = np.asarray(scatter_chol, dtype=float)
    return ResidualBlock(frame_id, F.T @ v, F.T @ dv)


def ef_point_residuals(points: np.ndarray, pose: Pose, plane: PlaneParam) -> tuple[np.ndarray, np.ndarray]:
    """Point-wise EF path: one point-to-plane residual and 1x6 Jacobian per raw point."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    R, t = pose.rotation, pose.translation
    n = plane.normal
    n_loc = R.T @ n
    r = pts @ n_loc + (n @ (t - plane.anchor))
    J = np.empty((len(pts), 6))
    J[:, :3] = np.cross(pts, n_loc)
    J[:, 3:] = n_loc
    return r, J

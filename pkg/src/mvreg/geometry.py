"""SE(3) / SO(3) primitives and a sorted 3x3 symmetric eigendecomposition.

Twists are 6-vectors ordered ``[omega, rho]``: rotation vector first
(radians), translational part second (meters).  Jacobians elsewhere in the
package use the right-perturbation ``T <- T @ exp_se3(delta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AngleNearPi, NotSymmetric

_SMALL_ANGLE = 1e-4
PI_MARGIN = 1e-6


def hat(w: np.ndarray) -> np.ndarray:
    x, y, z = w
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(m: np.ndarray) -> np.ndarray:
    return 0.5 * np.array([m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1]])


def _so3_coeffs(theta: float) -> tuple[float, float, float]:
    """Return (sin t / t, (1 - cos t) / t^2, (t - sin t) / t^3)."""
    if theta < _SMALL_ANGLE:
        t2 = theta * theta
        a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0
        b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0
        c = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
        return a, b, c
    s = math.sin(theta)
    half = math.sin(0.5 * theta)
    b = 2.0 * half * half / (theta * theta)
    if theta < 1e-2:
        t2 = theta * theta
        c = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0 - t2 * t2 * t2 / 362880.0
    else:
        c = (theta - s) / theta**3
    return s / theta, b, c


def so3_exp(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    theta = float(np.linalg.norm(w))
    a, b, _ = _so3_coeffs(theta)
    W = hat(w)
    return np.eye(3) + a * W + b * (W @ W)


def so3_log(R: np.ndarray) -> np.ndarray:
    """Rotation vector of ``R`` on the principal branch (angle < pi - 1e-6)."""
    R = np.asarray(R, dtype=float)
    axis_sin = 0.5 * vee(R - R.T)  # sin(theta) * axis
    s = float(np.linalg.norm(axis_sin))
    c = 0.5 * (float(np.trace(R)) - 1.0)
    theta = math.atan2(s, c)
    if theta > math.pi - PI_MARGIN:
        raise AngleNearPi(f"rotation angle {theta!r} is within {PI_MARGIN} of pi")
    if theta < _SMALL_ANGLE:
        a, _, _ = _so3_coeffs(theta)
        return axis_sin / a
    if theta < 0.5 * math.pi:
        return axis_sin * (theta / s)
    # sin(theta) is small relative to its error here; read the axis off the
    # symmetric part instead and take the sign from the skew part.
    S = 0.5 * (R + R.T) - c * np.eye(3)
    j = int(np.argmax(np.diag(S)))
    axis = S[:, j] / math.sqrt(S[j, j])
    axis /= np.linalg.norm(axis)
    if axis @ axis_sin < 0:
        axis = -axis
    return theta * axis


def so3_left_jacobian(w: np.ndarray) -> np.ndarray:
    theta = float(np.linalg.norm(w))
    _, b, c = _so3_coeffs(theta)
    W = hat(w)
    return np.eye(3) + b * W + c * (W @ W)


def so3_left_jacobian_inv(w: np.ndarray) -> np.ndarray:
    theta = float(np.linalg.norm(w))
    W = hat(w)
    if theta < 1e-3:
        t2 = theta * theta
        d = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    else:
        half = 0.5 * theta
        d = (1.0 - half / math.tan(half)) / (theta * theta)
    return np.eye(3) - 0.5 * W + d * (W @ W)


def rotation_angle(R: np.ndarray) -> float:
    """Geodesic angle of a rotation matrix, robust near 0 and pi."""
    s = float(np.linalg.norm(0.5 * vee(R - R.T)))
    c = 0.5 * (float(np.trace(R)) - 1.0)
    return math.atan2(s, c)


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform mapping local coordinates to world: ``x -> R x + t``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> Pose:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> Pose:
        m = np.asarray(m, dtype=float)
        return cls(m[:3, :3], m[:3, 3])

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def inverse(self) -> Pose:
        Rt = self.rotation.T
        return Pose(Rt, -Rt @ self.translation)

    def compose(self, other: Pose) -> Pose:
        return Pose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    __matmul__ = compose

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform a single point or an (n, 3) array of points."""
        points = np.asarray(points, dtype=float)
        return points @ self.rotation.T + self.translation

    def retract(self, delta: np.ndarray) -> Pose:
        """Right-perturbation ``self @ exp_se3(delta)``."""
        return self.compose(exp_se3(delta))

    def __repr__(self) -> str:
        return f"Pose(rotation={self.rotation.tolist()}, translation={self.translation.tolist()})"


def exp_se3(xi: np.ndarray) -> Pose:
    xi = np.asarray(xi, dtype=float).reshape(6)
    w, rho = xi[:3], xi[3:]
    return Pose(so3_exp(w), so3_left_jacobian(w) @ rho)


def log_se3(p: Pose) -> np.ndarray:
    w = so3_log(p.rotation)
    rho = so3_left_jacobian_inv(w) @ p.translation
    return np.concatenate([w, rho])


def transform_point(p: Pose, x: np.ndarray) -> np.ndarray:
    return p.rotation @ np.asarray(x, dtype=float) + p.translation


@dataclass(frozen=True, eq=False)
class EigenDecomp:
    """``m = rotation_basis @ diag(eigenvalues) @ rotation_basis.T``, eigenvalues descending."""

    rotation_basis: np.ndarray
    eigenvalues: np.ndarray

    @property
    def normal(self) -> np.ndarray:
        return self.rotation_basis[:, 2]


def orient(v: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Flip ``v`` so its first significant component among (z, y, x) is positive."""
    for i in (2, 1, 0):
        if abs(v[i]) > tol:
            return v if v[i] > 0 else -v
    return v


def _orient_batch(V: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    # V: (..., 3) vectors; same rule as `orient`, vectorised
    sign = np.ones(V.shape[:-1])
    decided = np.zeros(V.shape[:-1], dtype=bool)
    for i in (2, 1, 0):
        comp = V[..., i]
        hit = ~decided & (np.abs(comp) > tol)
        sign = np.where(hit & (comp < 0), -1.0, sign)
        decided |= hit
    return V * sign[..., None]


def sorted_eigh_batch(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched descending eigendecomposition of (..., 3, 3) symmetric matrices.

    Returns ``(basis, eigenvalues)`` with the sign convention of
    :func:`sorted_eigendecomposition`.
    """
    w, V = np.linalg.eigh(m)
    w = w[..., ::-1]
    V = V[..., :, ::-1].copy()
    # third column: z, then y, then x positive; first column: largest
    # magnitude component positive; second column fixes det = +1
    V[..., :, 2] = _orient_batch(V[..., :, 2])
    v1 = V[..., :, 0]
    idx = np.argmax(np.abs(v1), axis=-1)
    lead = np.take_along_axis(v1, idx[..., None], axis=-1)[..., 0]
    V[..., :, 0] = v1 * np.where(lead < 0, -1.0, 1.0)[..., None]
    V[..., :, 1] = np.cross(V[..., :, 2], V[..., :, 0])
    return V, w


def sorted_eigendecomposition(m: np.ndarray, sym_tol: float = 1e-9) -> EigenDecomp:
    m = np.asarray(m, dtype=float)
    scale = max(float(np.abs(m).max()), 1e-300)
    if float(np.abs(m - m.T).max()) > sym_tol * scale:
        raise NotSymmetric("matrix is not symmetric within tolerance")
    V, w = sorted_eigh_batch(0.5 * (m + m.T))
    V.setflags(write=False)
    w.setflags(write=False)
    return EigenDecomp(V, w)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Haar-uniform rotation from a normalised Gaussian quaternion."""
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    return quat_to_rotation(q)


def quat_to_rotation(q: np.ndarray) -> np.ndarray:
    """Scalar-last unit quaternion ``(x, y, z, w)`` to a rotation matrix."""
    x, y, z, w = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def rotation_to_quat(R: np.ndarray) -> np.ndarray:
    """Rotation matrix to a scalar-last unit quaternion with ``w >= 0``."""
    R = np.asarray(R, dtype=float)
    tr = float(np.trace(R))
    if tr > 0:
        s = 2.0 * math.sqrt(tr + 1.0)
        q = np.array(
            [(R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s, 0.25 * s]
        )
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = 2.0 * math.sqrt(max(1.0 + R[i, i] - R[j, j] - R[k, k], 0.0))
        q = np.empty(4)
        q[i] = 0.25 * s
        q[j] = (R[j, i] + R[i, j]) / s
        q[k] = (R[k, i] + R[i, k]) / s
        q[3] = (R[k, j] - R[j, k]) / s
    q /= np.linalg.norm(q)
    return -q if q[3] < 0 else q

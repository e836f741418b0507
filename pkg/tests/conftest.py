from __future__ import annotations

import numpy as np
import pytest
from scipy.linalg import expm

from mvreg.geometry import Pose, random_rotation

_ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance_log():
    def record(criterion: str, ok: bool, detail: str) -> bool:
        line = f"{criterion}: {'PASS' if ok else 'FAIL'} ({detail})"
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


def random_pose(rng: np.random.Generator, scale: float = 2.0) -> Pose:
    return Pose(random_rotation(rng), rng.uniform(-scale, scale, 3))


def twist_matrix(xi: np.ndarray) -> np.ndarray:
    w, rho = xi[:3], xi[3:]
    m = np.zeros((4, 4))
    m[:3, :3] = [[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]]
    m[:3, 3] = rho
    return m


def perturb_right(pose: Pose, xi: np.ndarray) -> Pose:
    """``pose @ exp(xi)`` via the generic matrix exponential (independent of mvreg)."""
    return Pose.from_matrix(pose.matrix() @ expm(twist_matrix(xi)))


def fd_jacobian(f, pose: Pose, h: float = 1e-6) -> np.ndarray:
    """Central differences of ``f(pose)`` w.r.t. a right-perturbation twist."""
    cols = []
    for i in range(6):
        e = np.zeros(6)
        e[i] = h
        cols.append((f(perturb_right(pose, e)) - f(perturb_right(pose, -e))) / (2 * h))
    return np.stack(cols, axis=-1)


def planar_patch(rng, normal, anchor, n_points, extent=1.0, sigma=0.0) -> np.ndarray:
    normal = np.asarray(normal, float) / np.linalg.norm(normal)
    helper = np.array([1.0, 0, 0]) if abs(normal[0]) < 0.9 else np.array([0, 1.0, 0])
    u = np.cross(normal, helper)
    u /= np.linalg.norm(u)
    v = np.cross(normal, u)
    ab = rng.uniform(-extent, extent, (n_points, 2))
    return anchor + ab[:, :1] * u + ab[:, 1:] * v + rng.standard_normal((n_points, 1)) * sigma * normal

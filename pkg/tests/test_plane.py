import math

import numpy as np
import pytest

from mvreg.errors import DegenerateCluster
from mvreg.geometry import Pose, exp_se3
from mvreg.objective import evm_cost, lemma1_rhs
from mvreg.plane import PlaneParam, check_optimal_conditions, estimate_plane
from mvreg.stats import aggregate, compute_stats, transform_stats

from .conftest import planar_patch, random_pose


def test_xy_plane():
    pts = np.array([[x, y, 0.0] for x in (-1, 0, 1) for y in (-1, 0, 1)])
    p = estimate_plane(compute_stats(pts))
    assert np.allclose(np.abs(p.normal), [0, 0, 1])
    assert np.allclose(p.anchor, 0)


def test_degenerate_clusters_raise():
    with pytest.raises(DegenerateCluster):
        estimate_plane(compute_stats([[0, 0, 0], [1, 0, 0]]))
    line = np.outer(np.linspace(-1, 1, 20), [1.0, 2.0, 3.0])
    with pytest.raises(DegenerateCluster):
        estimate_plane(compute_stats(line))


def test_normal_is_unit_and_minimises_rayleigh(rng):
    for _ in range(50):
        pts = rng.normal(size=(200, 3)) * rng.uniform(0.05, 2.0, 3)
        s = compute_stats(pts)
        n = estimate_plane(s).normal
        assert abs(np.linalg.norm(n) - 1) < 1e-12
        best = n @ s.cov @ n
        cand = rng.normal(size=(1000, 3))
        cand /= np.linalg.norm(cand, axis=1, keepdims=True)
        q = np.einsum("mi,ij,mj->m", cand, s.cov, cand)
        assert best <= q.min() + 1e-12


def test_homogeneous_and_distance():
    p = PlaneParam([0, 0, 2.0], [1.0, 1.0, 3.0])
    assert np.allclose(p.homogeneous, [0, 0, 1, -3])
    assert np.allclose(p.distance([[0, 0, 5.0], [7, 7, 3.0]]), [2.0, 0.0])


def _frame_views(rng, normal, anchor, poses, n=100, sigma=0.0):
    """Sample world points on a plane and express them in each frame."""
    out = []
    for T in poses:
        world = planar_patch(rng, normal, anchor, n, sigma=sigma)
        out.append(T.inverse().apply(world))
    return out


def test_eigenvalue_cost_equals_mean_squared_distance(rng):
    for _ in range(50):
        poses = [random_pose(rng) for _ in range(4)]
        local = [rng.normal(size=(rng.integers(5, 60), 3)) * [1.0, 1.0, 0.05] for _ in poses]
        agg = aggregate([transform_stats(compute_stats(p), T) for p, T in zip(local, poses)])
        plane = estimate_plane(agg)
        lhs = evm_cost(agg)
        rhs = lemma1_rhs(list(zip(poses, local)), plane)
        assert abs(lhs - rhs) <= 1e-10 * max(rhs, 1e-12)


def test_conditions_hold_at_noiseless_optimum(rng):
    for _ in range(20):
        poses = [random_pose(rng) for _ in range(5)]
        normal = rng.normal(size=3)
        anchor = rng.normal(size=3)
        local = _frame_views(rng, normal, anchor, poses)
        stats = [compute_stats(p) for p in local]
        agg = aggregate([transform_stats(s, T) for s, T in zip(stats, poses)])
        plane = estimate_plane(agg)
        rep = check_optimal_conditions(poses, stats, plane, 1e-9, 1e-9)
        assert rep.satisfied
        assert rep.offsets.shape == (10,)
        # both conditions hold, so the weyl lower bound is attained
        assert evm_cost(agg) < 1e-14 * np.trace(agg.cov)


def test_conditions_detect_misaligned_frame(rng):
    poses = [random_pose(rng) for _ in range(3)]
    local = _frame_views(rng, [0, 0, 1], [0, 0, 0], poses)
    stats = [compute_stats(p) for p in local]
    bad = list(poses)
    bad[1] = bad[1] @ exp_se3([math.radians(2), 0, 0, 0, 0, 0])
    agg = aggregate([transform_stats(s, T) for s, T in zip(stats, bad)])
    rep = check_optimal_conditions(bad, stats, estimate_plane(agg), 1e-6, 1e-6)
    assert not rep.satisfied
    assert rep.max_angle > 1e-3

    shifted = list(poses)
    shifted[2] = Pose(poses[2].rotation, poses[2].translation + [0, 0, 0.1])
    agg = aggregate([transform_stats(s, T) for s, T in zip(stats, shifted)])
    rep = check_optimal_conditions(shifted, stats, estimate_plane(agg), 1e-6, 1e-6)
    assert not rep.satisfied
    assert rep.max_offset > 0.05

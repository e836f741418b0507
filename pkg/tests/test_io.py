import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from mvreg.errors import NonUnitQuaternion, ParseError, UnsupportedFormat
from mvreg.geometry import Pose
from mvreg.io import (
    format_trajectory,
    parse_ply,
    parse_trajectory,
    read_ply,
    read_trajectory,
    write_ply,
    write_trajectory,
)

from .conftest import random_pose


def binary_ply(points, extra_float=False, fmt="binary_little_endian", dtype="<f4"):
    pts = np.asarray(points)
    props = ["property float x", "property float y", "property float z"] if dtype == "<f4" else [
        "property double x", "property double y", "property double z"]
    fields = [("x", dtype), ("y", dtype), ("z", dtype)]
    if extra_float:
        props.append("property uchar red")
        fields.append(("red", "u1"))
    header = "\n".join(["ply", f"format {fmt} 1.0", f"element vertex {len(pts)}", *props, "end_header"]) + "\n"
    rec = np.zeros(len(pts), dtype=fields)
    rec["x"], rec["y"], rec["z"] = pts[:, 0], pts[:, 1], pts[:, 2]
    return header.encode() + rec.tobytes()


def test_ascii_round_trip_is_exact(tmp_path, rng):
    pts = rng.normal(size=(100, 3)) * 1e3
    p = tmp_path / "a.ply"
    write_ply(p, pts)
    assert np.array_equal(read_ply(p), pts)


def test_binary_float_and_double(rng):
    pts = rng.normal(size=(50, 3))
    got = parse_ply(binary_ply(pts))
    assert np.array_equal(got, pts.astype("<f4").astype(float))
    assert np.array_equal(parse_ply(binary_ply(pts, dtype="<f8")), pts)
    assert np.array_equal(parse_ply(binary_ply(pts, extra_float=True)), pts.astype("<f4").astype(float))


def test_big_endian_unsupported(rng):
    with pytest.raises(UnsupportedFormat):
        parse_ply(binary_ply(rng.normal(size=(3, 3)), fmt="binary_big_endian"))


def test_ascii_with_extra_properties_and_faces():
    data = b"""ply
format ascii 1.0
comment made by hand
element vertex 3
property float x
property float y
property float z
property uchar red
element face 1
property list uchar int vertex_indices
end_header
0 0 0 255
1 0 0 0
0 1 0 10
3 0 1 2
"""
    assert np.array_equal(parse_ply(data), [[0, 0, 0], [1, 0, 0], [0, 1, 0]])


def test_empty_cloud():
    data = b"ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nend_header\n"
    assert parse_ply(data).shape == (0, 3)


@pytest.mark.parametrize(
    "data",
    [
        b"",
        b"not a ply",
        b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n",
        b"ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n",
        b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n0 0\n",
        b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 a 0\n",
        b"ply\nformat weird 1.0\nelement vertex 0\nend_header\n",
        b"ply\nformat binary_little_endian 1.0\nelement vertex 5\nproperty float x\nproperty float y\nproperty float z\nend_header\n\x00\x00",
    ],
)
def test_malformed_ply_raises_parse_error(data):
    with pytest.raises(ParseError):
        parse_ply(data)


@settings(max_examples=500, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.binary(max_size=400))
def test_ply_fuzz_random_bytes(data):
    try:
        parse_ply(data)
    except ParseError:
        pass


@settings(max_examples=500, deadline=None)
@given(st.integers(0, 300), st.binary(max_size=8), st.integers(0, 2**31))
def test_ply_fuzz_mutated_valid_files(pos, junk, seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(4, 3))
    base = binary_ply(pts) if seed % 2 else (
        b"ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\nend_header\n"
        + b"\n".join(b" ".join(repr(float(v)).encode() for v in p) for p in pts) + b"\n")
    pos = min(pos, len(base))
    mutated = base[:pos] + junk + base[pos + len(junk):]
    try:
        out = parse_ply(mutated)
        assert out.ndim == 2 and out.shape[1] == 3
    except ParseError:
        pass


def test_trajectory_round_trip(tmp_path, rng):
    poses = [random_pose(rng) for _ in range(10)]
    p = tmp_path / "t.txt"
    write_trajectory(p, poses)
    back = read_trajectory(p)
    for a, b in zip(poses, back):
        assert np.allclose(a.matrix(), b.matrix(), atol=1e-15)


def test_trajectory_text_format():
    text = format_trajectory([Pose.identity(), Pose(np.eye(3), [0.5, -0.0, 2.0])])
    assert text == "0 0 0 0 0 0 0 1\n1 0.5 0 2 0 0 0 1\n"


def test_trajectory_comments_order_and_renormalisation():
    text = "# header\n\n1 1 0 0 0 0 0 1.0005\n0 0 0 0 0 0 0 1\n"
    poses = parse_trajectory(text)
    assert len(poses) == 2
    assert np.allclose(poses[1].translation, [1, 0, 0])
    assert np.allclose(poses[1].rotation, np.eye(3))


@pytest.mark.parametrize(
    "text, exc",
    [
        ("0 0 0 0 0 0 1\n", ParseError),
        ("0 0 0 0 0 0 0 1 9\n", ParseError),
        ("0 a 0 0 0 0 0 1\n", ParseError),
        ("0 nan 0 0 0 0 0 1\n", ParseError),
        ("0 0 0 0 0 0 0 1\n0 0 0 0 0 0 0 1\n", ParseError),
        ("0 0 0 0 0 0 0 2\n", NonUnitQuaternion),
        ("1.5 0 0 0 0 0 0 1\n", ParseError),
    ],
)
def test_malformed_trajectory(text, exc):
    with pytest.raises(exc):
        parse_trajectory(text)


def test_non_utf8_trajectory(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_bytes(b"\xff\xfe\x00")
    with pytest.raises(ParseError):
        read_trajectory(p)


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=200))
def test_trajectory_fuzz(text):
    try:
        poses = parse_trajectory(text)
    except ParseError:
        return
    for p in poses:
        assert np.all(np.isfinite(p.matrix()))
        assert math.isclose(np.linalg.det(p.rotation), 1.0, abs_tol=1e-9)

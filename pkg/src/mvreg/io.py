"""PLY point clouds and plain-text trajectories.

Trajectory format, one pose per line::

    index tx ty tz qx qy qz qw

Quaternions are scalar-last.  Lines starting with ``#`` and blank lines are
skipped.  Readers either return a value or raise a :class:`ParseError`
subclass; no other exception escapes them for malformed input.
"""

from __future__ import annotations

import math
import os
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import NonUnitQuaternion, ParseError, UnsupportedFormat
from .geometry import Pose, quat_to_rotation, rotation_to_quat

PathLike = str | os.PathLike

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}  # fmt: skip


class _Element:
    def __init__(self, name: str, count: int):
        self.name = name
        self.count = count
        # (name, dtype) for scalars, (name, count_dtype, item_dtype) for lists
        self.props: list[tuple] = []

    @property
    def has_list(self) -> bool:
        return any(len(p) == 3 for p in self.props)


def _parse_header(data: bytes) -> tuple[str, list[_Element], int]:
    if not data.startswith(b"ply"):
        raise ParseError("missing 'ply' magic")
    end = data.find(b"end_header")
    if end < 0:
        raise ParseError("header has no end_header")
    nl = data.find(b"\n", end)
    body_start = len(data) if nl < 0 else nl + 1
    try:
        header = data[:end].decode("ascii")
    except UnicodeDecodeError as exc:
        raise ParseError("header is not ASCII") from exc
    fmt = None
    elements: list[_Element] = []
    for raw in header.splitlines()[1:]:
        tok = raw.split()
        if not tok or tok[0] in ("comment", "obj_info"):
            continue
        if tok[0] == "format":
            if len(tok) < 2:
                raise ParseError("malformed format line")
            fmt = tok[1]
        elif tok[0] == "element":
            if len(tok) != 3 or not tok[2].isdigit():
                raise ParseError(f"malformed element line: {raw!r}")
            elements.append(_Element(tok[1], int(tok[2])))
        elif tok[0] == "property":
            if not elements:
                raise ParseError("property before any element")
            if len(tok) == 5 and tok[1] == "list":
                if tok[2] not in _PLY_TYPES or tok[3] not in _PLY_TYPES:
                    raise ParseError(f"unknown list type in {raw!r}")
                elements[-1].props.append((tok[4], _PLY_TYPES[tok[2]], _PLY_TYPES[tok[3]]))
            elif len(tok) == 3 and tok[1] in _PLY_TYPES:
                elements[-1].props.append((tok[2], _PLY_TYPES[tok[1]]))
            else:
                raise ParseError(f"malformed property line: {raw!r}")
        else:
            raise ParseError(f"unexpected header line: {raw!r}")
    if fmt is None:
        raise ParseError("header has no format line")
    if fmt == "binary_big_endian":
        raise UnsupportedFormat("big-endian PLY is not supported")
    if fmt not in ("ascii", "binary_little_endian"):
        raise ParseError(f"unknown PLY format {fmt!r}")
    return fmt, elements, body_start


def _xyz_columns(el: _Element) -> list[int]:
    names = [p[0] for p in el.props]
    try:
        return [names.index(c) for c in "xyz"]
    except ValueError:
        raise ParseError("vertex element lacks x/y/z properties") from None


def _read_ascii(body: bytes, elements: list[_Element]) -> np.ndarray:
    try:
        text = body.decode("ascii")
    except UnicodeDecodeError as exc:
        raise ParseError("ASCII body contains non-ASCII bytes") from exc
    lines = iter(ln for ln in text.splitlines() if ln.strip())
    for el in elements:
        is_vertex = el.name == "vertex"
        if is_vertex:
            cols = _xyz_columns(el)
            if el.count > len(body):
                raise ParseError("body is shorter than the declared vertex count")
            out = np.empty((el.count, 3))
        for i in range(el.count):
            line = next(lines, None)
            if line is None:
                raise ParseError(f"truncated body: element {el.name!r} row {i} missing")
            tok = line.split()
            values = []
            pos = 0
            for prop in el.props:
                if pos >= len(tok):
                    raise ParseError(f"too few values in row {i} of {el.name!r}")
                if len(prop) == 3:
                    try:
                        n = int(tok[pos])
                    except ValueError as exc:
                        raise ParseError(f"bad list length {tok[pos]!r}") from exc
                    if n < 0:
                        raise ParseError("negative list length")
                    pos += 1 + n
                    values.append(None)
                else:
                    values.append(tok[pos])
                    pos += 1
            if pos > len(tok):
                raise ParseError(f"too few values in row {i} of {el.name!r}")
            if is_vertex:
                try:
                    out[i] = [float(values[c]) for c in cols]
                except (TypeError, ValueError) as exc:
                    raise ParseError(f"non-numeric coordinate in vertex row {i}") from exc
        if is_vertex:
            return out
    raise ParseError("no vertex element")


def _read_binary(body: bytes, elements: list[_Element]) -> np.ndarray:
    offset = 0
    for el in elements:
        if el.name == "vertex":
            if el.has_list:
                raise UnsupportedFormat("binary vertex element with list properties")
            cols = _xyz_columns(el)
            dtype = np.dtype([(f"p{i}", "<" + p[1]) for i, p in enumerate(el.props)])
            need = dtype.itemsize * el.count
            if offset + need > len(body):
                raise ParseError("truncated binary body")
            rec = np.frombuffer(body, dtype=dtype, count=el.count, offset=offset)
            return np.stack([rec[f"p{c}"].astype(np.float64) for c in cols], axis=1).reshape(-1, 3)
        if el.has_list:
            raise UnsupportedFormat("list-valued element before vertex data in a binary file")
        size = sum(np.dtype(p[1]).itemsize for p in el.props)
        offset += size * el.count
    raise ParseError("no vertex element")


def parse_ply(data: bytes) -> np.ndarray:
    fmt, elements, start = _parse_header(data)
    body = data[start:]
    if fmt == "ascii":
        return _read_ascii(body, elements)
    return _read_binary(body, elements)


def read_ply(path: PathLike) -> np.ndarray:
    """Vertex positions of a PLY file as an (n, 3) float64 array, file order."""
    with open(path, "rb") as fh:
        data = fh.read()
    return parse_ply(data)


def write_ply(path: PathLike, points: np.ndarray) -> None:
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(pts)}",
        "property double x",
        "property double y",
        "property double z",
        "end_header",
    ]
    lines += [" ".join(repr(float(v)) for v in p) for p in pts]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def _fmt(x: float) -> str:
    x = float(x) + 0.0  # no "-0"
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def format_trajectory(poses: Sequence[Pose]) -> str:
    out = []
    for i, p in enumerate(poses):
        q = rotation_to_quat(p.rotation)
        out.append(" ".join([str(i)] + [_fmt(v) for v in (*p.translation, *q)]))
    return "\n".join(out) + ("\n" if out else "")


def write_trajectory(path: PathLike, poses: Sequence[Pose]) -> None:
    Path(path).write_text(format_trajectory(poses), encoding="ascii")


def parse_trajectory(text: str) -> list[Pose]:
    rows: dict[int, Pose] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        tok = s.split()
        if len(tok) != 8:
            raise ParseError(f"line {lineno}: expected 8 fields, got {len(tok)}")
        try:
            idx = int(tok[0])
            vals = [float(v) for v in tok[1:]]
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
        if not all(math.isfinite(v) for v in vals):
            raise ParseError(f"line {lineno}: non-finite value")
        if idx in rows:
            raise ParseError(f"line {lineno}: duplicate index {idx}")
        q = np.array(vals[3:])
        norm = float(np.linalg.norm(q))
        if abs(norm - 1.0) > 1e-3:
            raise NonUnitQuaternion(f"line {lineno}: quaternion norm {norm:.6g}")
        rows[idx] = Pose(quat_to_rotation(q / norm), vals[:3])
    return [rows[i] for i in sorted(rows)]


def read_trajectory(path: PathLike) -> list[Pose]:
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError("trajectory file is not UTF-8") from exc
    return parse_trajectory(text)

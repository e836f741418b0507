"""Trajectory (RPE, APE) and reconstruction (nearest-neighbour) error metrics."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyInput, LengthMismatch
from .geometry import Pose, rotation_angle


@dataclass(frozen=True)
class RPEResult:
    trans_err: np.ndarray  # per adjacent pair, meters
    rot_err: np.ndarray  # per adjacent pair, radians

    @property
    def mean_trans(self) -> float:
        return float(self.trans_err.mean())

    @property
    def mean_rot(self) -> float:
        return float(self.rot_err.mean())

    @property
    def rms_trans(self) -> float:
        return float(np.sqrt(np.mean(self.trans_err**2)))


@dataclass(frozen=True)
class APEResult:
    trans_err: np.ndarray  # per frame, meters

    @property
    def mean(self) -> float:
        return float(self.trans_err.mean())

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.trans_err**2)))


def rpe(estimated: Sequence[Pose], reference: Sequence[Pose]) -> RPEResult:
    if len(estimated) != len(reference):
        raise LengthMismatch(f"{len(estimated)} estimated vs {len(reference)} reference poses")
    if len(estimated) < 2:
        raise LengthMismatch("RPE needs at least two poses")
    t_err, r_err = [], []
    for k in range(len(estimated) - 1):
        d_est = estimated[k].inverse() @ estimated[k + 1]
        d_ref = reference[k].inverse() @ reference[k + 1]
        e = d_ref.inverse() @ d_est
        t_err.append(float(np.linalg.norm(e.translation)))
        r_err.append(rotation_angle(e.rotation))
    return RPEResult(np.array(t_err), np.array(r_err))


def ape(estimated: Sequence[Pose], reference: Sequence[Pose], align: str = "translation") -> APEResult:
    """Per-frame translation error after aligning trajectory centroids.

    ``align="se3"`` fits a full rigid alignment (Kabsch/Umeyama without
    scale) instead of the default translation-only alignment.
    """
    if len(estimated) != len(reference):
        raise LengthMismatch(f"{len(estimated)} estimated vs {len(reference)} reference poses")
    if not estimated:
        raise LengthMismatch("APE needs at least one pose")
    est = np.stack([p.translation for p in estimated])
    ref = np.stack([p.translation for p in reference])
    if align == "translation":
        aligned = est - (est.mean(axis=0) - ref.mean(axis=0))
    elif align == "se3":
        ce, cr = est.mean(axis=0), ref.mean(axis=0)
        U, _, Vt = np.linalg.svd((ref - cr).T @ (est - ce))
        D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
        R = U @ D @ Vt
        aligned = (est - ce) @ R.T + cr
    else:
        raise ValueError(f"unknown alignment {align!r}")
    return APEResult(np.linalg.norm(aligned - ref, axis=1))


@dataclass(frozen=True)
class StructuralError:
    distances: np.ndarray

    @property
    def mean(self) -> float:
        return float(self.distances.mean())

    @property
    def median(self) -> float:
        return float(np.median(self.distances))

    @property
    def p95(self) -> float:
        return float(np.percentile(self.distances, 95))

    def histogram(self, bins: int | Sequence[float] = 50) -> tuple[np.ndarray, np.ndarray]:
        return np.histogram(self.distances, bins=bins)


def nn_distances_linear(queries: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Brute-force nearest-neighbour distances, O(n m)."""
    out = np.empty(len(queries))
    for i, q in enumerate(queries):
        out[i] = np.sqrt(np.min(np.sum((targets - q) ** 2, axis=1)))
    return out


def structural_error(reconstructed: np.ndarray, ground_truth_model: np.ndarray) -> StructuralError:
    rec = np.asarray(reconstructed, dtype=float).reshape(-1, 3)
    gt = np.asarray(ground_truth_model, dtype=float).reshape(-1, 3)
    if len(rec) == 0 or len(gt) == 0:
        raise EmptyInput("structural_error needs non-empty point sets")
    _, idx = cKDTree(gt).query(rec)
    # recompute with the same arithmetic as the linear scan so ties and
    # rounding agree bit for bit
    dist = np.sqrt(np.sum((gt[idx] - rec) ** 2, axis=1))
    return StructuralError(dist)


def write_trajectory_errors_csv(path: str | Path, rpe_res: RPEResult, ape_res: APEResult) -> None:
    """One row per frame; RPE columns refer to the pair (frame - 1, frame)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "rpe_trans", "rpe_rot", "ape_trans"])
        for k, a in enumerate(ape_res.trans_err):
            if k == 0:
                w.writerow([k, "", "", repr(float(a))])
            else:
                w.writerow([k, repr(float(rpe_res.trans_err[k - 1])), repr(float(rpe_res.rot_err[k - 1])), repr(float(a))])


def write_structural_csv(path: str | Path, err: StructuralError) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["point", "nn_distance"])
        for i, d in enumerate(err.distances):
            w.writerow([i, repr(float(d))])

"""Batch command-line interface.

Exit codes: 0 success, 1 input/parse/usage errors, 2 no active voxels.
Set ``MVREG_THREADS`` to override ``benchmark --jobs``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from . import bench
from .errors import MvregError, NoActiveVoxels
from .io import read_ply, read_trajectory, write_ply, write_trajectory
from .metrics import ape, rpe, structural_error, write_structural_csv, write_trajectory_errors_csv
from .pipeline import PipelineConfig, register
from .simulator import RNG_ALGORITHM, SceneConfig, generate_scene, perturb_poses

SCHEMA_VERSION = 1

log = logging.getLogger("mvreg")


def _fail(msg: str, code: int = 1) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _cloud_paths(items: Sequence[str]) -> list[Path]:
    if len(items) == 1 and Path(items[0]).is_dir():
        paths = sorted(Path(items[0]).glob("*.ply"))
        if not paths:
            raise FileNotFoundError(f"no .ply files in directory {items[0]}")
        return paths
    return [Path(p) for p in items]


def cmd_register(args: argparse.Namespace) -> int:
    try:
        cfg = PipelineConfig.from_json(args.config)
        clouds = [read_ply(p) for p in _cloud_paths(args.clouds)]
        init = read_trajectory(args.init)
    except (OSError, MvregError) as exc:
        return _fail(str(exc))
    try:
        result = register(clouds, init, cfg)
    except NoActiveVoxels as exc:
        return _fail(str(exc), 2)
    except MvregError as exc:
        return _fail(str(exc))
    try:
        write_trajectory(args.out, result.poses)
        if args.report:
            report = {"schema_version": SCHEMA_VERSION, **result.report.to_dict()}
            report["num_features"] = len(result.planes)
            report["config"] = cfg.to_dict()
            Path(args.report).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        return _fail(str(exc))
    if not result.report.converged:
        print(f"warning: stopped after {result.report.iterations} iterations without converging", file=sys.stderr)
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.poses < 2 or args.planes < 1 or args.points_per_plane < 3:
        return _fail("need --poses >= 2, --planes >= 1, --points-per-plane >= 3")
    if args.sigma < 0 or args.rot_sigma < 0 or args.trans_sigma < 0:
        return _fail("noise levels must be non-negative")
    cfg = SceneConfig(
        num_poses=args.poses,
        num_planes=args.planes,
        points_per_plane_per_frame=args.points_per_plane,
        noise_sigma=args.sigma,
        pose_box=args.pose_box,
        plane_extent=args.plane_extent,
        seed=args.seed,
    )
    scene = generate_scene(cfg)
    init = perturb_poses(scene.gt_poses, np.deg2rad(args.rot_sigma), args.trans_sigma, args.seed + 1_000_003)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        names = []
        for k, cloud in enumerate(scene.clouds):
            name = f"frame_{k:04d}.ply"
            write_ply(out / name, cloud)
            names.append(name)
        write_trajectory(out / "gt.txt", scene.gt_poses)
        write_trajectory(out / "init.txt", init)
        # noiseless planes are exactly flat, so a tight planarity threshold
        # rejects voxels where two planes meet
        reg_cfg = PipelineConfig(planarity_ratio=1e-6 if args.sigma == 0 else 0.1)
        (out / "config.json").write_text(json.dumps(reg_cfg.to_dict(), indent=2) + "\n", encoding="utf-8")
        manifest = {
            "schema_version": SCHEMA_VERSION,
            "scene": cfg.to_dict(),
            "rng": RNG_ALGORITHM,
            "perturbation": {"rot_sigma_deg": args.rot_sigma, "trans_sigma": args.trans_sigma},
            "clouds": names,
            "ground_truth": "gt.txt",
            "initial": "init.txt",
            "config": "config.json",
            "planes": [
                {"normal": p.normal.tolist(), "anchor": p.anchor.tolist()} for p in scene.planes
            ],
            "associations": [
                {"frame": f, "start": a, "stop": b, "plane": j}
                for (f, a, b), j in sorted(scene.associations.items())
            ],
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        return _fail(str(exc))
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    if (args.cloud is None) != (args.model is None):
        return _fail("--cloud and --model must be given together")
    try:
        est = read_trajectory(args.est)
        ref = read_trajectory(args.ref)
        rp = rpe(est, ref)
        ap = ape(est, ref)
        write_trajectory_errors_csv(args.out, rp, ap)
        summary = (
            f"rpe_trans_mean={rp.mean_trans:.6g} rpe_trans_rms={rp.rms_trans:.6g} "
            f"rpe_rot_mean={rp.mean_rot:.6g} ape_mean={ap.mean:.6g} ape_rms={ap.rms:.6g}"
        )
        if args.cloud is not None:
            err = structural_error(read_ply(args.cloud), read_ply(args.model))
            out = Path(args.out)
            write_structural_csv(out.with_name(out.stem + "_structural.csv"), err)
            summary += f" struct_mean={err.mean:.6g} struct_median={err.median:.6g} struct_p95={err.p95:.6g}"
    except (OSError, MvregError) as exc:
        return _fail(str(exc))
    print(summary)
    return 0


def _jobs(requested: int) -> int:
    env = os.environ.get("MVREG_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, requested)


def cmd_benchmark(args: argparse.Namespace) -> int:
    try:
        grid = json.loads(Path(args.grid).read_text(encoding="utf-8"))
        trials = bench.expand_grid(grid, args.seeds)
    except (OSError, json.JSONDecodeError, MvregError) as exc:
        return _fail(f"{args.grid}: {exc}")
    jobs = _jobs(args.jobs)
    try:
        if jobs == 1:
            rows = [bench.run_trial(t) for t in trials]
        else:
            with ProcessPoolExecutor(jobs) as pool:
                rows = list(pool.map(bench.run_trial, trials))
    except MvregError as exc:
        return _fail(str(exc))
    try:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=bench.CSV_COLUMNS)
            w.writeheader()
            w.writerows(rows)
    except OSError as exc:
        return _fail(str(exc))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvreg", description="Multiview planar bundle-adjustment registration.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("register", help="register a sequence of point clouds")
    p.add_argument("--config", required=True, help="pipeline config JSON (strict keys)")
    p.add_argument("--clouds", required=True, nargs="+", help="directory of .ply files (sorted by name) or a list of .ply paths")
    p.add_argument("--init", required=True, help="initial trajectory, one pose per cloud")
    p.add_argument("--out", required=True, help="output trajectory path")
    p.add_argument("--report", help="optional JSON report with solver statistics and cost trace")
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("simulate", help="write a random planar scene with ground truth")
    p.add_argument("--poses", type=int, required=True, help="number of frames (>= 2)")
    p.add_argument("--planes", type=int, required=True, help="number of planar patches (>= 1)")
    p.add_argument("--sigma", type=float, required=True, help="noise along the plane normal, meters")
    p.add_argument("--seed", type=int, required=True, help="random seed")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--points-per-plane", type=int, default=200, help="points per plane per frame (default 200)")
    p.add_argument("--pose-box", type=float, default=2.0, help="half-extent of frame positions, meters (default 2)")
    p.add_argument("--plane-extent", type=float, default=1.0, help="half-size of each square patch, meters (default 1)")
    p.add_argument("--rot-sigma", type=float, default=1.0, help="initial-guess rotation noise per axis, degrees (default 1)")
    p.add_argument("--trans-sigma", type=float, default=0.05, help="initial-guess translation noise per axis, meters (default 0.05)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="RPE/APE and optional structural error")
    p.add_argument("--est", required=True, help="estimated trajectory")
    p.add_argument("--ref", required=True, help="reference trajectory")
    p.add_argument("--cloud", help="reconstructed cloud (world frame) for structural error")
    p.add_argument("--model", help="ground-truth model cloud for structural error")
    p.add_argument("--out", required=True, help="per-frame CSV; structural errors go to <stem>_structural.csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", help="accuracy/runtime sweep over simulated scenes")
    p.add_argument("--grid", required=True, help="grid JSON: num_poses, num_planes, sigma (lists) and optional points_per_plane, objective, rot_sigma_deg, trans_sigma, max_iters")
    p.add_argument("--out", required=True, help="output CSV, one row per (grid point, seed, objective)")
    p.add_argument("--seeds", type=int, default=1, help="seeds per grid point (default 1)")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes (default 1; MVREG_THREADS overrides)")
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

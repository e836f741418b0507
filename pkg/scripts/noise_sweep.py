"""Median APE/RPE against measurement noise for both objectives.

    python3 scripts/noise_sweep.py --seeds 20 --out noise.csv
"""

import argparse
import csv
import math

import numpy as np

from mvreg.metrics import ape, rpe
from mvreg.simulator import SceneConfig, generate_scene, perturb_poses, scene_problem
from mvreg.solver import OBJECTIVES, SolverConfig, solve


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sigmas", type=float, nargs="+", default=[0.001, 0.005, 0.01, 0.05])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--poses", type=int, default=10)
    ap.add_argument("--planes", type=int, default=30)
    ap.add_argument("--out", help="optional CSV with one row per (sigma, objective)")
    args = ap.parse_args()

    rows = []
    for sigma in args.sigmas:
        for obj in OBJECTIVES:
            a, r, it = [], [], []
            for seed in range(args.seeds):
                scene = generate_scene(SceneConfig(args.poses, args.planes, 50, sigma, seed=seed))
                init = perturb_poses(scene.gt_poses, math.radians(5), 0.1, seed + 1_000_003)
                poses, rep = solve(scene_problem(scene, init), SolverConfig(objective=obj))
                a.append(ape(poses, scene.gt_poses).mean)
                r.append(rpe(poses, scene.gt_poses).mean_trans)
                it.append(rep.iterations)
            row = {"sigma": sigma, "objective": obj, "median_ape": float(np.median(a)),
                   "median_rpe": float(np.median(r)), "mean_iters": float(np.mean(it))}
            rows.append(row)
            print(f"sigma={sigma:<6g} {obj:<9} APE={row['median_ape']:.3e} RPE={row['median_rpe']:.3e} "
                  f"iters={row['mean_iters']:.2f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


if __name__ == "__main__":
    main()

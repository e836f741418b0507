"""Per-iteration evaluation time as points per feature grow, voxels and frames fixed.

The statistics path cost depends on the number of (feature, frame) pairs only;
the raw-point path touches every point.
"""

import argparse
import math

import numpy as np

from mvreg.bench import RawPointPath, best_time, proposed_iteration
from mvreg.simulator import SceneConfig, generate_scene, perturb_poses, scene_problem
from mvreg.solver import StackedObservations


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, nargs="+", default=[25, 50, 100, 200, 400, 800])
    ap.add_argument("--poses", type=int, default=10)
    ap.add_argument("--planes", type=int, default=30)
    args = ap.parse_args()

    base = None
    print(f"{'pts/plane':>9} {'stats [ms]':>11} {'raw [ms]':>10} {'stats x':>8} {'raw x':>7}")
    for ppp in args.points:
        scene = generate_scene(SceneConfig(args.poses, args.planes, ppp, 0.01, seed=0))
        init = perturb_poses(scene.gt_poses, math.radians(5), 0.1, 1)
        R = np.stack([p.rotation for p in init])
        t = np.stack([p.translation for p in init])
        stacked = StackedObservations(scene_problem(scene, init).features)
        raw = RawPointPath(scene.clouds, scene.associations)
        ts = best_time(lambda: proposed_iteration(stacked, R, t), 30)
        tr = best_time(lambda: raw.evaluate(R, t), 10)
        base = base or (ts, tr)
        print(f"{ppp:>9} {1e3 * ts:>11.3f} {1e3 * tr:>10.3f} {ts / base[0]:>8.2f} {tr / base[1]:>7.2f}")


if __name__ == "__main__":
    main()

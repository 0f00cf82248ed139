"""Hoelder-exponent and alpha estimates for fBm paths across Hurst indices."""
import argparse

import numpy as np

from dilstab import verify as vf
from dilstab.model import ProcessSpec, SamplePath
from dilstab.pathstats import estimate_alpha, estimate_holder_exponent
from dilstab.simulate import SimGrid, sample_paths


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--hurst", type=float, nargs="+", default=[0.3, 0.6, 0.9])
    ap.add_argument("--paths", type=int, default=20)
    ap.add_argument("--steps", type=int, default=2**14)
    ap.add_argument("--quantile", type=float, default=0.9)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=4)
    args = ap.parse_args()

    fan = vf.default_design("fbm", steps=args.steps)
    for i, H in enumerate(args.hurst):
        g = SimGrid(1.0, args.steps, seed=args.seed + i, extra_times=tuple(vf.design_times(fan)))
        X = sample_paths(ProcessSpec.fbm(H), g, args.paths, workers=args.workers)
        paths = [SamplePath(g.times, x) for x in X]
        hold = [estimate_holder_exponent(p, quantile=args.quantile).estimate for p in paths]
        alpha = [estimate_alpha(p, fan).estimate for p in paths]
        print(f"H={H}: holder median={np.median(hold):.3f} (iqr {np.subtract(*np.percentile(hold, [75, 25])):.3f})"
              f"  alpha median={np.median(alpha):.3f}")


if __name__ == "__main__":
    main()

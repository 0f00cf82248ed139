"""Accuracy and undecided rate of the dichotomy discriminator over several seeds."""
import argparse
from collections import Counter

from dilstab import verify as vf
from dilstab.simulate import SimGrid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--family", default="fbm", choices=["fbm", "power"])
    ap.add_argument("--h1", type=float, default=0.6)
    ap.add_argument("--h2", type=float, default=0.8)
    ap.add_argument("--paths", type=int, default=200)
    ap.add_argument("--steps", type=int, default=2**14)
    ap.add_argument("--ratio", type=float, default=0.7)
    ap.add_argument("--anchors", type=int, default=64)
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--workers", type=int, default=4)
    args = ap.parse_args()

    grids = vf.default_design(args.family, args.ratio, args.steps, anchors=args.anchors)
    for seed in args.seeds:
        mc = vf.McConfig(args.paths, SimGrid(1.0, args.steps, seed=seed), workers=args.workers)
        r = vf.discrimination_experiment(args.h1, args.h2, args.family, mc, grids)
        sides = [dict(Counter(l)) for l in r.details["labels"]]
        print(f"seed={seed}: accuracy={r.statistic:.3f} undecided={r.details['undecided_rate']:.3f} "
              f"pass={r.passed} labels={sides}")


if __name__ == "__main__":
    main()

"""Wall time of the continuous and discrete engines as the horizon grows.

Prints one CSV row per (engine, size, horizon) plus the growth factor of the
fastest repetition relative to the shortest horizon.
"""
import argparse
import csv
import sys

from npinf.experiments import runtime_scaling


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--horizons", default="30,60,120,240")
    p.add_argument("--sizes", default="10000")
    p.add_argument("--reps", type=int, default=25)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", help="CSV path (default: stdout)")
    args = p.parse_args(argv)

    horizons = [int(x) for x in args.horizons.split(",")]
    sizes = [int(x) for x in args.sizes.split(",")]
    rows = runtime_scaling(("cnp", "dnp"), horizons, sizes, args.reps, args.seed)

    base = {(r.engine, r.size): r.wall_min_s for r in rows if r.horizon == horizons[0]}
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh)
    w.writerow(["engine", "size", "horizon", "wall_mean_s", "wall_min_s", "growth", "spread_mean"])
    for r in rows:
        w.writerow([r.engine, r.size, r.horizon, f"{r.wall_mean_s:.5f}", f"{r.wall_min_s:.5f}",
                    f"{r.wall_min_s / base[r.engine, r.size]:.2f}", f"{r.spread_mean:.1f}"])
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()

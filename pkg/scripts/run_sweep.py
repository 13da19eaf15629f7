"""Default budget sweep; one CSV per (algorithm, k, tuple) under results/sweep/."""

import argparse
import time

from clinadapt.sweep import SweepSpec, run_sweep, write_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/sweep")
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--oracle", action="store_true", help="add exact-optimum rows")
    args = ap.parse_args()

    spec = SweepSpec(trials=args.trials, seed=args.seed, oracle=args.oracle)
    t = time.perf_counter()
    rows = run_sweep(spec)
    paths = write_sweep(rows, args.out)
    print(f"{len(rows)} rows, {len(paths)} files in {time.perf_counter() - t:.1f} s -> {args.out}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Run the generated benchmarks and print a wall-time/overhead table.

Usage: python3 scripts/run_benchmarks.py [--iters N] [--repeats R] [--names flat nest ckpt-demo]
"""

from __future__ import annotations

import argparse

from choreo.bench import BenchConfig, oracle, run_once

VARIANTS = ("plain", "chk", "chk-rescue")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--iters", type=int, default=2000)
    ap.add_argument("--repeats", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--names", nargs="+", default=["flat", "nest", "ckpt-demo"])
    args = ap.parse_args()

    header = f"{'benchmark':<10} {'variant':<11} {'time (s)':>9} {'vs plain':>9} {'recov':>6} {'peak frames':>12} {'oracle':>7}"
    print(header)
    print("-" * len(header))
    for name in args.names:
        base = None
        for variant in VARIANTS:
            cfg = BenchConfig(name, args.iters, variant, seed=args.seed, repeats=args.repeats)
            rep = run_once(cfg)
            base = base or rep.wall_time
            agrees = "ok" if rep.result == oracle(cfg) else "DIFF"
            print(f"{name:<10} {variant:<11} {rep.wall_time:>9.3f} {rep.wall_time / base:>9.2f} "
                  f"{rep.recoveries:>6} {rep.peak_frames:>12} {agrees:>7}")


if __name__ == "__main__":
    main()

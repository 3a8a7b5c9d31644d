#!/usr/bin/env python3
"""Sensitivity sweeps on quadratic(1,1000) from (-0.06, 0.001): initial
learning rate at fixed beta=0.3, and beta at fixed initial rate 0.001."""

import argparse

from dsaopt import harness


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/sweeps")
    ap.add_argument("--tol", type=float, default=1e-3)
    args = ap.parse_args()

    base = harness.make_config("quadratic-1000", "dsa", args.seed, out_dir=args.out)

    path, rows = harness.run_sweep("alpha0", [0.01, 0.001, 0.0001],
                                   harness.RunConfig(**{**base.__dict__, "beta": 0.3}),
                                   tol=args.tol)
    print(f"initial-rate sweep (beta=0.3) -> {path}")
    for row in rows:
        print(f"  lr0={row['value']:g}: iters to {args.tol:g} = {row['iterations_to_tolerance']}")

    path, rows = harness.run_sweep("beta", [1.0, 0.1, 0.01], base, tol=args.tol)
    print(f"beta sweep (lr0=0.001) -> {path}")
    for row in rows:
        print(f"  beta={row['value']:g}: iters to {args.tol:g} = {row['iterations_to_tolerance']}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Ablation tables: full DSA vs the shared-alpha and plain-gradient-step
variants, next to the SGD and Adam baselines."""

import argparse

from dsaopt import harness
from dsaopt.data import dataset_available


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/ablation")
    ap.add_argument("--data-dir", default="datasets")
    ap.add_argument("--targets", default="wine,car")
    args = ap.parse_args()

    for target in args.targets.split(","):
        target = target.strip()
        if target in harness.EPOCH_DEFAULTS and not dataset_available(target, args.data_dir):
            print(f"== {target}: data file missing, skipped")
            continue
        path, rows = harness.run_ablation(target, seed=args.seed, out_dir=args.out,
                                          data_dir=args.data_dir)
        print(f"== {target} -> {path}")
        for row in rows:
            label = row["optimizer"]
            if label == "dsa":
                label += f"[pp={row['per_parameter']},sign={row['sign_step']}]"
            metric = row.get("accuracy")
            value = f"{metric:.2f}%" if metric is not None else f"{row['final_loss']:.3e}"
            print(f"  {label:28s} {value}")


if __name__ == "__main__":
    main()

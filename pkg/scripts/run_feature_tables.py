#!/usr/bin/env python3
"""Train the MLP on the four feature datasets with every optimizer and print
an accuracy / F1 / recall / precision table per dataset at its capture epoch.
"""

import argparse

from dsaopt import harness
from dsaopt.data import dataset_available

OPTIMIZERS = ("sgd", "momentum", "rmsprop", "adadelta", "adagrad",
              "adam", "adamw", "adamax", "hd", "dsa")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/tables")
    ap.add_argument("--data-dir", default="datasets")
    ap.add_argument("--datasets", default="iris,wine,car,agaricus")
    ap.add_argument("--batch-size", type=int, default=0)
    args = ap.parse_args()

    for ds in args.datasets.split(","):
        ds = ds.strip()
        if not dataset_available(ds, args.data_dir):
            print(f"== {ds}: data file missing, skipped (see scripts/fetch_datasets.py)")
            continue
        epochs = harness.EPOCH_DEFAULTS[ds]
        print(f"== {ds} ({epochs} epochs) ==")
        print(f"{'':10s} {'ACCU':>7s}  {'F1':>13s}  {'RECALL':>13s}  {'PRECISION':>13s}")
        for optimizer in OPTIMIZERS:
            cfg = harness.make_config(f"mlp-{ds}-{epochs}", optimizer, args.seed,
                                      out_dir=args.out, data_dir=args.data_dir,
                                      batch_size=args.batch_size)
            result = harness.run(cfg)
            s = result.summary
            print(f"{optimizer:10s} {s['final_accuracy']:7.2f}  {s['final_f1_span']:>13s}"
                  f"  {s['final_recall_span']:>13s}  {s['final_precision_span']:>13s}")


if __name__ == "__main__":
    main()

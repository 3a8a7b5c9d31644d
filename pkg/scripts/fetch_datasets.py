#!/usr/bin/env python3
"""Download the four feature datasets from the UCI archive into datasets/.

Records a sha256 for every file in datasets/checksums.lock.  Where the
archive is unreachable, ``--bootstrap-sklearn`` materializes the iris and
wine files from scikit-learn's bundled copies instead (same values,
normalized formatting); car and agaricus have no offline source.
"""

import argparse
import sys

from dsaopt import data


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dir", default="datasets")
    ap.add_argument("--datasets", default=",".join(sorted(data.DATASETS)))
    ap.add_argument("--bootstrap-sklearn", action="store_true")
    args = ap.parse_args()

    if args.bootstrap_sklearn:
        for path in data.bootstrap_sklearn(args.dir):
            print("wrote", path)
        return 0

    failed = []
    for ds in args.datasets.split(","):
        ds = ds.strip()
        try:
            path = data.fetch_dataset(ds, args.dir)
            print("fetched", path, data.sha256_file(path))
        except Exception as exc:  # noqa: BLE001
            print(f"failed {ds}: {exc}", file=sys.stderr)
            failed.append(ds)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Render synthetic digit datasets to IDX files for the CLI and experiments.

Writes train (6000 samples, seed 0) and test (2000 samples, seed 1) splits
as MNIST-style IDX image/label pairs under the output directory.
"""

import argparse
from pathlib import Path

import numpy as np

from weightcert.data import (synthetic_digits, write_idx_images,
                             write_idx_labels)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("data"),
                    help="output directory (default: data/)")
    ap.add_argument("--train-size", type=int, default=6000)
    ap.add_argument("--test-size", type=int, default=2000)
    ap.add_argument("--train-seed", type=int, default=0)
    ap.add_argument("--test-seed", type=int, default=1)
    args = ap.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    for tag, size, seed in (("train", args.train_size, args.train_seed),
                            ("test", args.test_size, args.test_seed)):
        ds = synthetic_digits(size, seed=seed)
        images = np.round(ds.inputs * 255).astype(np.uint8).reshape(-1, 28, 28)
        write_idx_images(args.out / f"{tag}-images.idx", images)
        write_idx_labels(args.out / f"{tag}-labels.idx", ds.labels)
        print(f"wrote {size} {tag} samples to {args.out}/{tag}-*.idx")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Export the scikit-learn 8x8 digits as IDX train/test files.

Pixels (0..16) are rescaled to 0..255. The first --train-per-class images of
each digit go to the training file and the rest to the test file.
"""
import argparse
import pathlib
import struct

import numpy as np
from sklearn.datasets import load_digits


def write_idx(images, labels, img_path, lab_path):
    with open(img_path, "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 8, 8))
        f.write(images.astype(np.uint8).tobytes())
    with open(lab_path, "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out_dir", type=pathlib.Path)
    ap.add_argument("--train-per-class", type=int, default=110)
    args = ap.parse_args()

    digits = load_digits()
    pixels = np.rint(digits.images * (255.0 / 16.0)).clip(0, 255)
    train, test = [], []
    for label in range(10):
        idx = np.flatnonzero(digits.target == label)
        train.extend(idx[: args.train_per_class])
        test.extend(idx[args.train_per_class :])
    train, test = np.sort(train), np.sort(test)

    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_idx(pixels[train], digits.target[train], args.out_dir / "digits-train-images.idx",
              args.out_dir / "digits-train-labels.idx")
    write_idx(pixels[test], digits.target[test], args.out_dir / "digits-test-images.idx",
              args.out_dir / "digits-test-labels.idx")
    print(f"train {len(train)}  test {len(test)}")


if __name__ == "__main__":
    main()

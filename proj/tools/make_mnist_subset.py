#!/usr/bin/env python3
"""Rebuild the bundled MNIST subset under data/mnist-subset/.

Source: the 10,000 MNIST digits shipped in the `mnist` npm package
(https://www.npmjs.com/package/mnist, MIT), stored there as per-digit JSON
arrays of intensities normalized to [0, 1] with three decimals.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_mnist_subset.py package/src/digits data/mnist-subset

Output is gzip-compressed IDX (the canonical MNIST container), split into a
7000-image train file and a 3000-image test file with a fixed shuffle seed.
"""

import gzip
import json
import os
import random
import struct
import sys

ROWS = COLS = 28
TRAIN_COUNT = 7000
SEED = 20210701


def load_digits(src):
    samples = []
    for digit in range(10):
        with open(os.path.join(src, f"{digit}.json")) as fh:
            flat = json.load(fh)["data"]
        assert len(flat) % (ROWS * COLS) == 0
        for k in range(len(flat) // (ROWS * COLS)):
            pix = flat[k * ROWS * COLS:(k + 1) * ROWS * COLS]
            samples.append((bytes(min(255, max(0, round(v * 255))) for v in pix), digit))
    return samples


def write_idx(path, samples):
    # gzip mtime pinned so reruns are byte-identical
    with open(path + "-images-idx3-ubyte.gz", "wb") as raw:
        with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as fh:
            fh.write(struct.pack(">IIII", 0x00000803, len(samples), ROWS, COLS))
            for pix, _ in samples:
                fh.write(pix)
    with open(path + "-labels-idx1-ubyte.gz", "wb") as raw:
        with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as fh:
            fh.write(struct.pack(">II", 0x00000801, len(samples)))
            fh.write(bytes(d for _, d in samples))


def main():
    src, dst = sys.argv[1], sys.argv[2]
    samples = load_digits(src)
    random.Random(SEED).shuffle(samples)
    os.makedirs(dst, exist_ok=True)
    write_idx(os.path.join(dst, "train"), samples[:TRAIN_COUNT])
    write_idx(os.path.join(dst, "t10k"), samples[TRAIN_COUNT:])
    print(f"wrote {TRAIN_COUNT} train / {len(samples) - TRAIN_COUNT} test samples to {dst}")


if __name__ == "__main__":
    main()

"""Write the 5000-sample MNIST subset bundled with mlxtend as a gzipped IDX pair.

The source CSV is sorted by label, so rows are shuffled with a fixed seed before
writing; taking the first N samples then gives a roughly class-balanced prefix.

Usage:
    pip download --no-deps -d /tmp/mlx mlxtend
    python3 -m zipfile -e /tmp/mlx/mlxtend-*.whl /tmp/mlx
    python3 scripts/make_mnist_subset.py /tmp/mlx/mlxtend/data/data/mnist_5k.csv.gz data/mnist-5k
"""

import gzip
import struct
import sys
from pathlib import Path

import numpy as np


def main(src: str, out_dir: str) -> None:
    table = np.genfromtxt(src, delimiter=",")
    images = table[:, :-1].astype(np.uint8)
    labels = table[:, -1].astype(np.uint8)
    order = np.random.RandomState(0).permutation(len(labels))
    images, labels = images[order], labels[order]

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = len(labels)
    # mtime=0 keeps the gzip bytes reproducible.
    with gzip.GzipFile(out / "images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, n, 28, 28))
        f.write(images.tobytes())
    with gzip.GzipFile(out / "labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(labels.tobytes())


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])

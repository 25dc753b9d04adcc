#!/usr/bin/env python3
"""Write a desk-scale MNIST split as IDX files.

Source: the `mnist` npm package (1.1.0), which ships 10,000 MNIST digits as
JSON arrays of pixel/255 values rounded to three decimals. rint(v * 255)
recovers the original bytes.

Train: the first 500 digits of every class (5,000 images).
Test:  every remaining digit (5,000 images).
"""

import argparse
import json
import pathlib
import struct
import subprocess
import sys
import tarfile
import tempfile

PER_CLASS_TRAIN = 500


def fetch_tarball(workdir: pathlib.Path) -> pathlib.Path:
    out = subprocess.run(
        ["npm", "pack", "mnist@1.1.0", "--silent"],
        cwd=workdir, check=True, capture_output=True, text=True,
    )
    return workdir / out.stdout.strip().splitlines()[-1]


def load_digits(tarball: pathlib.Path):
    digits = {}
    with tarfile.open(tarball) as tar:
        for d in range(10):
            member = tar.extractfile(f"package/src/digits/{d}.json")
            if member is None:
                raise SystemExit(f"{tarball}: digit file {d}.json missing")
            raw = json.load(member)["data"]
            if len(raw) % 784:
                raise SystemExit(f"digit {d}: {len(raw)} values is not a multiple of 784")
            pixels = bytes(int(round(v * 255)) for v in raw)
            digits[d] = [pixels[i:i + 784] for i in range(0, len(pixels), 784)]
    return digits


def write_idx(prefix: pathlib.Path, samples):
    with open(f"{prefix}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(samples), 28, 28))
        for _, img in samples:
            f.write(img)
    with open(f"{prefix}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(samples)))
        f.write(bytes(label for label, _ in samples))


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=pathlib.Path(__file__).resolve().parent.parent / "data" / "mnist",
                        type=pathlib.Path)
    parser.add_argument("--tarball", type=pathlib.Path, help="use a local mnist-1.1.0.tgz")
    parser.add_argument("--force", action="store_true")
    args = parser.parse_args()

    marker = args.out / "test-labels-idx1-ubyte"
    if marker.exists() and not args.force:
        print(f"{args.out}: already prepared")
        return 0
    args.out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        tarball = args.tarball or fetch_tarball(pathlib.Path(tmp))
        digits = load_digits(tarball)

    train, test = [], []
    for d in range(10):
        train += [(d, img) for img in digits[d][:PER_CLASS_TRAIN]]
        test += [(d, img) for img in digits[d][PER_CLASS_TRAIN:]]
    write_idx(args.out / "train", train)
    write_idx(args.out / "test", test)
    print(f"{args.out}: {len(train)} train, {len(test)} test")
    return 0


if __name__ == "__main__":
    sys.exit(main())

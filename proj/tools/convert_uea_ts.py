#!/usr/bin/env python3
"""Convert a UEA/UCR ``.ts`` archive pair into the directory layout read by
``autotcl`` (``uea_archive`` format).

    <out>/train/data/<instance_id>.txt   T rows x F columns, whitespace separated
    <out>/train/labels.txt               instance_id,label
    <out>/test/...

Only equal-length series without missing values are supported.
"""
import argparse
import pathlib
import sys


def parse_ts(path):
    instances = []
    in_data = False
    with open(path, encoding="utf-8", errors="replace") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if not in_data:
                if line.lower().startswith("@data"):
                    in_data = True
                continue
            *dims, label = line.split(":")
            channels = []
            for d in dims:
                values = d.split(",")
                if any(v.strip() in ("?", "NaN", "nan") for v in values):
                    sys.exit(f"{path}:{lineno}: missing values are not supported")
                channels.append([float(v) for v in values])
            lengths = {len(c) for c in channels}
            if len(lengths) != 1:
                sys.exit(f"{path}:{lineno}: channels of unequal length")
            instances.append((channels, label.strip()))
    return instances


def write_split(instances, out_dir):
    data_dir = out_dir / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "labels.txt", "w") as labels:
        for i, (channels, label) in enumerate(instances):
            iid = f"{i:05d}"
            rows = zip(*channels)
            with open(data_dir / f"{iid}.txt", "w") as fh:
                for row in rows:
                    fh.write(" ".join(repr(v) for v in row) + "\n")
            labels.write(f"{iid},{label}\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("train_ts")
    ap.add_argument("test_ts")
    ap.add_argument("out")
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    write_split(parse_ts(args.train_ts), out / "train")
    write_split(parse_ts(args.test_ts), out / "test")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Pack CSV grids into a COPE stack file for `cope analyze`.

Each input CSV holds one layer as a matrix of numbers, one grid row per
line. By default the first line is the northernmost row (largest y); pass
--bottom-first if the first line is row 0. Empty cells, NA and nan become
masked cells. Layers are written in the order given on the command line.
"""

import argparse
import csv
import math
import struct
import sys

MAGIC = b"COPE"
VERSION = 1


def read_layer(path):
    rows = []
    with open(path, newline="") as f:
        for line in csv.reader(f):
            if not line or all(not c.strip() for c in line):
                continue
            rows.append([parse_value(c, path) for c in line])
    if not rows:
        sys.exit(f"{path}: no data rows")
    width = len(rows[0])
    for k, r in enumerate(rows):
        if len(r) != width:
            sys.exit(f"{path}: line {k + 1} has {len(r)} values, expected {width}")
    return rows


def parse_value(text, path):
    t = text.strip()
    if t == "" or t.lower() in ("na", "nan"):
        return math.nan
    try:
        return float(t)
    except ValueError:
        sys.exit(f"{path}: cannot parse {text!r} as a number")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("layers", nargs="+", help="one CSV file per layer")
    ap.add_argument("-o", "--out", required=True, help="output .bin path")
    ap.add_argument("--origin-x", type=float, default=0.0, help="x of the first column's center")
    ap.add_argument("--origin-y", type=float, default=0.0, help="y of row 0's center")
    ap.add_argument("--spacing-x", type=float, default=1.0)
    ap.add_argument("--spacing-y", type=float, default=1.0)
    ap.add_argument("--bottom-first", action="store_true", help="first CSV line is row 0")
    args = ap.parse_args()

    if args.spacing_x <= 0 or args.spacing_y <= 0:
        sys.exit("spacings must be positive")

    grids = [read_layer(p) for p in args.layers]
    ny, nx = len(grids[0]), len(grids[0][0])
    for p, g in zip(args.layers, grids):
        if (len(g), len(g[0])) != (ny, nx):
            sys.exit(f"{p}: shape {len(g)}x{len(g[0])} differs from {ny}x{nx}")
    if nx < 2 or ny < 2:
        sys.exit("grids need at least 2 rows and 2 columns")

    header = MAGIC + struct.pack(
        "<IIIIBBHdddd",
        VERSION, nx, ny, len(grids),
        1,  # value type: float64
        1,  # row-major
        0,
        args.origin_x, args.origin_y, args.spacing_x, args.spacing_y,
    )
    assert len(header) == 56

    with open(args.out, "wb") as out:
        out.write(header)
        for g in grids:
            rows = g if args.bottom_first else list(reversed(g))
            for r in rows:
                out.write(struct.pack(f"<{nx}d", *r))
    print(f"wrote {args.out}: {nx}x{ny}, {len(grids)} layers")


if __name__ == "__main__":
    main()

"""Pool per-component decimal-agreement histograms over many subjects.

Each argument pair is a reference dump and a test dump for one subject
(MAT-file or engine dump directory). For every array the worst relative
difference of each component is binned by its number of matching
decimals, and the counts are summed across subjects. Output is CSV with
one row per array and one column per decimal bin.

    python3 scripts/decimal_histograms.py ref1.mat test1 ref2.mat test2 ...
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from iclabel_engine.conformance import ARRAY_NAMES, MAX_DECIMALS, component_histogram, read_dump


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("dumps", nargs="+", type=Path, help="alternating reference and test dumps")
    ap.add_argument("--max-decimals", type=int, default=MAX_DECIMALS)
    ap.add_argument("--mode", choices=("relative", "absolute"), default="relative")
    args = ap.parse_args()
    if len(args.dumps) % 2:
        ap.error("dumps must come in reference/test pairs")

    totals = {name: np.zeros(args.max_decimals + 1, dtype=int) for name in ARRAY_NAMES}
    seen = set()
    for ref_path, test_path in zip(args.dumps[::2], args.dumps[1::2]):
        ref, test = read_dump(ref_path), read_dump(test_path)
        for name in ARRAY_NAMES:
            if name in ref.arrays and name in test.arrays:
                totals[name] += component_histogram(ref.arrays[name], test.arrays[name], args.max_decimals, args.mode)
                seen.add(name)

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["array", *range(args.max_decimals + 1)])
    for name in ARRAY_NAMES:
        if name in seen:
            w.writerow([name, *totals[name].tolist()])


if __name__ == "__main__":
    main()

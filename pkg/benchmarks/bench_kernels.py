"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeats 5] [--scale 1]
"""

import argparse

from randnla import _kernels
from randnla.bench import time_kernels


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--scale", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rows = time_kernels(args.repeats, args.scale, args.seed)
    print(f"active backend: {_kernels.BACKEND}; best of {args.repeats}, milliseconds")
    print(f"{'kernel':<20}{'numpy':>12}{'numba':>12}{'speed-up':>10}")
    for case, row in rows.items():
        nb = row["numba"]
        nb_txt = "n/a" if nb is None else f"{nb:.3f}"
        up = "n/a" if nb is None else f"{row['numpy'] / nb:.1f}x"
        print(f"{case:<20}{row['numpy']:>12.3f}{nb_txt:>12}{up:>10}")


if __name__ == "__main__":
    main()

"""Write the trajectory data behind the orbit plots as CSV files."""

import argparse
from pathlib import Path

from viterbo.verify import FIGURE_KINDS, emit_figure_data


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="figures")
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--per-segment", type=int, default=64)
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for kind in FIGURE_KINDS:
        path = out / f"{kind}.csv"
        emit_figure_data(kind, n=args.n, out=path, per_segment=args.per_segment)
        print(path)


if __name__ == "__main__":
    main()

"""figures <kind> <in.csv> <out.png> -- render solver CSVs to PNG."""

from __future__ import annotations

import argparse
import sys

from .plots import plot_dim_sweep, plot_solution, plot_training

KINDS = {
    "training": plot_training,
    "solution": plot_solution,
    "dim-sweep": plot_dim_sweep,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="figures",
        description="Render solver CSV outputs (training summaries, solution "
                    "dumps, dimension sweeps) to PNG.")
    parser.add_argument("kind", choices=sorted(KINDS))
    parser.add_argument("input_csv")
    parser.add_argument("output_png")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        KINDS[args.kind](args.input_csv, args.output_png)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(args.output_png)
    return 0


if __name__ == "__main__":
    sys.exit(main())

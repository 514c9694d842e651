"""Command-line figure generation from summary CSVs."""

from __future__ import annotations

import argparse
import sys

from .figures import plot_payoff_comparison, plot_sat_vs_budget


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plots", description=__doc__)
    parser.add_argument("--summary", nargs="+", required=True, help="summary CSV paths")
    parser.add_argument("--out", required=True, help="output directory for images")
    parser.add_argument("--kind", choices=("sat", "payoff", "both"), default="both")
    args = parser.parse_args(argv)

    if args.kind in ("sat", "both"):
        path, _series = plot_sat_vs_budget(args.summary, args.out)
        print(f"wrote {path}")
    if args.kind in ("payoff", "both"):
        path, _means = plot_payoff_comparison(args.summary, args.out)
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command line: render one or more series CSVs to images."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import SchemaMismatch, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hawkesim-figures",
        description="Render hawkesim fig1/fig2/fig3 CSV series as annotated plots.",
    )
    parser.add_argument("csv", nargs="+", help="series CSV files")
    parser.add_argument(
        "--out-dir", default=".", help="output directory (default: current)"
    )
    parser.add_argument(
        "--format", default="png", choices=["png", "svg", "pdf"],
        help="image format",
    )
    args = parser.parse_args(argv)
    for csv_path in args.csv:
        csv_path = Path(csv_path)
        out = Path(args.out_dir) / (csv_path.stem + "." + args.format)
        try:
            render(csv_path, out)
        except SchemaMismatch as exc:
            print(f"schema mismatch: {exc}", file=sys.stderr)
            return 2
        print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())

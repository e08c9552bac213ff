"""Standalone figure renderer: render --kind <k> --in <csv> --out <img>."""
from __future__ import annotations

import argparse
import sys

from .render import KINDS, FigureJob, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render", description="Render an echosim CSV as a figure"
    )
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--in", dest="input_csv", required=True, metavar="CSV")
    parser.add_argument("--out", dest="output_image", required=True, metavar="IMG")
    args = parser.parse_args(argv)
    try:
        path = render(FigureJob(args.kind, args.input_csv, args.output_image))
    except Exception as exc:
        print(f"render: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

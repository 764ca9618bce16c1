"""reportgen <run_dir> [--format html|md] [--out dir]"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import render_report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="reportgen",
        description="Render a fracns run directory into figures and a report.",
    )
    parser.add_argument("run_dir", type=str)
    parser.add_argument("--format", dest="fmt", choices=["html", "md"], default="html")
    parser.add_argument("--out", type=str, default=None,
                        help="output directory (default: <run_dir>_report)")
    args = parser.parse_args(argv)
    run_dir = Path(args.run_dir)
    if not run_dir.is_dir():
        print(f"{run_dir} is not a directory", file=sys.stderr)
        return 2
    index, warnings = render_report(run_dir, out_dir=args.out, fmt=args.fmt)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(index)
    return 0


if __name__ == "__main__":
    sys.exit(main())

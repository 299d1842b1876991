"""Plotting command line.

    viz panels    --dumps 'out/*.dgrd' --axes 0,1 --out fig.png [--meta manifest.json]
    viz panels    --dumps 'out/*.dgrd' --mode-marginal --out modes.png
    viz estimates --csv out/run00_estimates.csv --out fig.png
"""

from __future__ import annotations

import argparse
import sys

from .estimates import plot_estimates, read_table
from .panels import load_dumps, load_obstacles, parse_axes, plot_density_panels, plot_mode_marginals


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="viz", description="Density and estimate plots")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("panels")
    p.add_argument("--dumps", required=True, help="glob of DGRD dump files")
    p.add_argument("--axes", default="0,1", help="axis pair for the heatmaps, e.g. 0,1 or y1,y2")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--meta", default=None, help="run manifest with obstacle metadata")
    p.add_argument("--mode-marginal", action="store_true", help="plot per-mode mass across time instead")

    p = sub.add_parser("estimates")
    p.add_argument("--csv", required=True, help="estimate table from a filter run")
    p.add_argument("--out", required=True, help="output image path")

    args = parser.parse_args(argv)
    try:
        if args.command == "panels":
            dumps = load_dumps(args.dumps)
            if args.mode_marginal:
                plot_mode_marginals(dumps, args.out)
            else:
                plot_density_panels(dumps, parse_axes(args.axes), args.out, load_obstacles(args.meta))
        else:
            plot_estimates(read_table(args.csv), args.out)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

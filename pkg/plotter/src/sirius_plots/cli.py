"""Command line: render one figure from a results CSV."""

import argparse
import sys

from .render import METRICS, PlotSpec, render


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sirius-plot",
        description="Plot BER or NMSE curves from a sirius-ofdm results CSV",
    )
    parser.add_argument("--csv", required=True, help="results.csv path")
    parser.add_argument("--metric", required=True, choices=METRICS)
    parser.add_argument("--speed", required=True, type=float,
                        help="velocity slice in km/h")
    parser.add_argument("--out", required=True, help="output image path (png)")
    parser.add_argument("--title", default=None)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    spec = PlotSpec(csv_path=args.csv, metric=args.metric,
                    speed_kmh=args.speed, out_path=args.out, title=args.title)
    try:
        path = render(spec)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line figure rendering for stochwave result files."""

from __future__ import annotations

import argparse
import sys

from .csvio import SchemaError, load_result
from .figures import PlotSpec, plot_convergence, plot_energy


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stochwave-plots",
        description="Render log-log convergence or expected-energy figures from result files.",
    )
    parser.add_argument("--input", "-i", action="append", required=True,
                        help="result file; repeat to overlay several")
    parser.add_argument("--kind", choices=("loglog-convergence", "energy-drift"), default=None,
                        help="figure kind (default: inferred from the file header)")
    parser.add_argument("--slopes", default="",
                        help="comma list of reference slopes for convergence figures")
    parser.add_argument("--title", default=None)
    parser.add_argument("--output", "-o", required=True, help="image file to write")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        kind = args.kind
        if kind is None:
            kind = "energy-drift" if load_result(args.input[0]).kind == "trace" else "loglog-convergence"
        slopes = tuple(float(s) for s in args.slopes.split(",") if s.strip())
        spec = PlotSpec(
            inputs=tuple(args.input), kind=kind, output=args.output,
            reference_slopes=slopes, title=args.title,
        )
        if kind == "energy-drift":
            plot_energy(spec)
        else:
            plot_convergence(spec)
        print(f"wrote {args.output}")
    except (SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: render --kind <k> --in <csv> --out <png>.

Exit codes: 0 success, 2 schema violation, 3 I/O error, 4 usage error.
"""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, PlotSpec, render
from .schema import SchemaError

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_IO = 3
EXIT_USAGE = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> _Parser:
    p = _Parser(prog="render",
                description="Render a dsm-spectra experiment CSV as a "
                            "PNG figure.")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--in", dest="input_csv", required=True,
                   metavar="CSV", help="input CSV path")
    p.add_argument("--out", dest="output_image", required=True,
                   metavar="PNG", help="output image path")
    p.add_argument("--bins", type=int, default=None,
                   help="re-bin the trial cosines into N bins instead of "
                        "using the recorded histogram rows "
                        "(collapse_hist only)")
    p.add_argument("--linear-x", action="store_true",
                   help="linear instead of logarithmic x axis")
    return p


def main(argv=None) -> int:
    arg_list = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(arg_list)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        spec = PlotSpec(input_csv=args.input_csv,
                        output_image=args.output_image, kind=args.kind,
                        bins=args.bins, log_x=not args.linear_x)
        render(spec)
    except SchemaError as exc:
        print(f"render: schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"render: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

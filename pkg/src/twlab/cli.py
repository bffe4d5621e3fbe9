"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 accuracy or noise-gate failure,
3 I/O failure.  ``TWLAB_WORKERS`` sets the worker pool size.
"""
from __future__ import annotations

import argparse
import sys

from .errors import AccuracyError, NoiseGateError, ValidationError
from .experiments import KINDS, emit_plotdata, load_config, run, to_csv, workers_from_env

EXIT_OK, EXIT_USAGE, EXIT_ACCURACY, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="twlab", description="Edge statistics of sample covariance matrices.")
    sub = p.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    for kind, defaults in KINDS.items():
        s = sub.add_parser(kind, help=f"run the {kind} experiment")
        s.add_argument("--config", help="key = value file with a [" + kind + "] section")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a field; keys: " + (", ".join(defaults) or "none"))
        s.add_argument("--seed", type=int, dest="master_seed", help="master seed")
        s.add_argument("-o", "--output", help="CSV path (a .json sidecar is written next to it)")
        s.add_argument("--plotdata", metavar="DIR", help="also write plot columns into DIR")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        workers = workers_from_env()
        cfg = load_config(args.kind, args.config, args.set, args.master_seed, args.output)
    except ValidationError as e:
        print(f"twlab {args.kind}: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        res = run(cfg, workers)
        if args.plotdata:
            emit_plotdata(res, args.plotdata)
    except (AccuracyError, NoiseGateError) as e:
        print(f"twlab {args.kind}: {e}", file=sys.stderr)
        return EXIT_ACCURACY
    except OSError as e:
        print(f"twlab {args.kind}: I/O failure: {e}", file=sys.stderr)
        return EXIT_IO
    if not cfg.output:
        sys.stdout.write(to_csv(res))
    for note in ("fit", "fit_error"):
        if note in res.metadata:
            print(f"{note}: {res.metadata[note]}", file=sys.stderr)
    return res.status


if __name__ == "__main__":
    sys.exit(main())

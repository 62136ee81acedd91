"""Command-line interface.

    lrp <kind> --config cfg.json [--seed N] [--workers N] [--out DIR]

Kinds: one-arm, cluster-tail, set-escape, giant, iso-audit, iso-dim,
blocks-audit, peierls, ftrees, oracle-verify, kernel-audit.  The config
file is a flat JSON object with dotted keys (see README).  The exit code
reflects the experiment's pass/fail status.
"""

from __future__ import annotations

import argparse
import sys

from .experiments import KINDS, ExperimentSpec, emit, run


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="lrp",
                                     description="long-range percolation laboratory")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--config", required=True, help="flat JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
    args = parser.parse_args(argv)

    spec = ExperimentSpec.from_file(args.kind, args.config,
                                    seed=args.seed, workers=args.workers)
    result = run(spec)
    if args.out:
        paths = emit(result, args.out)
        print(f"wrote {paths['csv']} and {paths['summary']}")
    else:
        sys.stdout.write(result.csv_text())
    status = "PASS" if result.passed else "FAIL"
    print(f"{args.kind}: {status} ({result.wall_clock:.2f}s)")
    return 0 if result.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())

"""``asmd-bench`` command line.

    asmd-bench run CONFIG [--out-dir DIR] [--threads K] [--timing]
    asmd-bench reference CONFIG
    asmd-bench rate TRACE.csv --window A:B
"""

import argparse
import sys

from . import bench


def build_parser():
    p = argparse.ArgumentParser(prog="asmd-bench", description="Run solver benchmarks and fit convergence rates.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run every section of a config and write trace CSVs")
    r.add_argument("config")
    r.add_argument("--out-dir", default="traces")
    r.add_argument("--threads", type=int, default=1, help="runs executed concurrently")
    r.add_argument("--timing", action="store_true",
                   help="record wall-clock milliseconds (output is then not byte-reproducible)")

    ref = sub.add_parser("reference", help="print the reference optimum for each run")
    ref.add_argument("config")

    rate = sub.add_parser("rate", help="fit the log-log slope of gap against stage")
    rate.add_argument("trace")
    rate.add_argument("--window", required=True, help="stage range a:b, inclusive")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            if args.threads < 1:
                raise ValueError("--threads must be at least 1")
            paths = bench.run_experiment(args.config, args.out_dir, args.threads, args.timing)
            for name, path in paths.items():
                print(f"{name}\t{path}")
        elif args.command == "reference":
            for name, fstar in bench.reference_report(args.config):
                print(f"{name}\t{fstar!r}")
        else:
            slope = bench.fit_rate_file(args.trace, bench.parse_window(args.window))
            print(f"{slope:.6f}")
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"asmd-bench: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: run, compare, and validate config files."""

import argparse
import sys

from . import harness


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="conewave",
        description="Batch driver for dispersive estimates on conic "
                    "manifolds: run config-driven sweeps, diff the "
                    "resulting reports, or just validate a config.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute the sweeps in a config file")
    run_p.add_argument("config", help="path to a sectioned key-value config")

    cmp_p = sub.add_parser("compare", help="diff two run-level JSON reports")
    cmp_p.add_argument("run_a", help="first run.json")
    cmp_p.add_argument("run_b", help="second run.json")

    val_p = sub.add_parser("validate",
                           help="check a config without running it")
    val_p.add_argument("config", help="path to a sectioned key-value config")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return harness.run(args.config)
        if args.command == "compare":
            return harness.compare(args.run_a, args.run_b)
        return harness.validate(args.config)
    except harness.ConfigError as exc:
        print(f"configuration error:\n{exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

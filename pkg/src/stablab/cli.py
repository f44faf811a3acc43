"""Command line: ``stablab run|list|report``."""
import argparse
import json
import sys

from . import report
from .errors import BudgetError, ConfigError
from .experiments import list_experiments, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET = 0, 2, 3


def _cmd_run(args):
    try:
        with open(args.config) as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rep = run_experiment(doc, out_dir=args.out, workers=args.workers)
    except ConfigError as exc:
        print(f"config error in field '{exc.field}': {exc.message}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetError as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    for c in rep.checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status}  {c.name}: {c.value:.6g}  (target {c.target})")
    print(f"wrote {', '.join(rep.files)} to {rep.out_dir} in {rep.wall_clock_s:.1f} s")
    return EXIT_OK


def _cmd_list(args):
    for eid, desc, ref in list_experiments():
        print(f"{eid:<15} {desc}  [{ref}]")
    return EXIT_OK


def _cmd_report(args):
    try:
        paths = report.rerender(args.dir)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for p in paths:
        print(p)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="stablab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment from a JSON config")
    r.add_argument("config")
    r.add_argument("--workers", type=int, default=None)
    r.add_argument("--out", default=None, help="output directory (default $STABLAB_OUT/<experiment_id>)")
    r.set_defaults(func=_cmd_run)
    sub.add_parser("list", help="list registered experiments").set_defaults(func=_cmd_list)
    rp = sub.add_parser("report", help="re-render SVG plots from the CSVs in DIR")
    rp.add_argument("dir")
    rp.set_defaults(func=_cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", None) is not None and args.workers < 1:
        print("config error in field 'workers': must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``circlaw {run,report,validate-config,list-ensembles}``.

Exit codes: 0 success, 1 task failure or failed assertion, 2 invalid
config, 3 resource budget exceeded.  The worker count is read from the
``CIRCLAW_WORKERS`` environment variable.
"""
from __future__ import annotations

import argparse
import logging
import sys

from ..ensembles import KIND_DESCRIPTIONS
from .config import ConfigError, load_config
from .report import IntegrityError, report
from .runner import EXIT_BUDGET, EXIT_CONFIG, EXIT_FAILED, EXIT_OK, BudgetExceeded, run


def _load(path):
    try:
        return load_config(path), None
    except ConfigError as exc:
        return None, f"config error in {path}: {exc}"
    except OSError as exc:
        return None, f"cannot read {path}: {exc}"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="circlaw", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("-o", "--output", help="results directory (overrides the config)")
    p_rep = sub.add_parser("report", help="verify a results directory and write plot data")
    p_rep.add_argument("results_dir")
    p_val = sub.add_parser("validate-config", help="parse a config and print its canonical form")
    p_val.add_argument("config")
    sub.add_parser("list-ensembles", help="list the available row distributions")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)

    if args.command == "list-ensembles":
        for kind, desc in KIND_DESCRIPTIONS.items():
            print(f"{kind:26s}{desc}")
        return EXIT_OK
    if args.command == "validate-config":
        cfg, err = _load(args.config)
        if err:
            print(err, file=sys.stderr)
            return EXIT_CONFIG
        print(cfg.to_text(), end="")
        return EXIT_OK
    if args.command == "run":
        cfg, err = _load(args.config)
        if err:
            print(err, file=sys.stderr)
            return EXIT_CONFIG
        try:
            res = run(cfg, args.output)
        except BudgetExceeded as exc:
            print(f"budget exceeded: {exc}", file=sys.stderr)
            return EXIT_BUDGET
        for f in res.failures:
            print(f"task {f['task']} failed: {f['error']}", file=sys.stderr)
        for c in res.assertion_results:
            print(f"{c['assertion']}: {c['value']} (limit {c['limit']}) {'PASS' if c['passed'] else 'FAIL'}")
        print(f"results in {res.directory}")
        return res.exit_code
    if args.command == "report":
        try:
            print(report(args.results_dir), end="")
        except IntegrityError as exc:
            print(f"integrity error: {exc}", file=sys.stderr)
            return EXIT_FAILED
        return EXIT_OK
    return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())

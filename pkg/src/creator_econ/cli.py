"""Command line entry point: ``creator-econ run|fit|check``.

Exit codes: 0 success, 1 validation failure (bad input or a failed check),
2 runtime error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .bench import fit_regret_slope, load_config, read_summary, run_experiment
from .economy import RejectedInput, load_instance
from .fullreco import run_property_checks


def _cmd_run(args) -> int:
    config = load_config(args.config)
    result = run_experiment(config)
    print(f"wrote {len(result.trace_paths)} traces and {result.summary_path}")
    for T, (mean, std, n) in sorted(result.summary.items()):
        print(f"T={T} mean_final_regret={mean:.4f} std={std:.4f} n={n}")
    return 0


def _cmd_fit(args) -> int:
    fit = fit_regret_slope(read_summary(args.summary))
    print(f"slope={fit.slope:.6f} intercept={fit.intercept:.6f} r_squared={fit.r_squared:.6f}")
    return 0


def _cmd_check(args) -> int:
    instance = load_instance(args.instance)
    results = run_property_checks(instance, seed=args.seed)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="creator-econ", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run seed-replicated learners and write traces + summary")
    run.add_argument("--config", required=True)
    run.set_defaults(func=_cmd_run)

    fit = sub.add_parser("fit", help="fit the log-log regret slope of a summary CSV")
    fit.add_argument("--summary", required=True)
    fit.set_defaults(func=_cmd_fit)

    check = sub.add_parser("check", help="run the full-recommendation property checks")
    check.add_argument("--instance", required=True)
    check.add_argument("--seed", type=int, default=0)
    check.set_defaults(func=_cmd_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except RejectedInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``ulrrm run|validate|default-config``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from importlib import resources

from .experiment import OUTPUT_ENV, load_config, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _report_errors(path, errors):
    for e in errors:
        loc = f"{path}:{e.line}" if e.line else str(path)
        print(f"{loc}: error: {e.message}", file=sys.stderr)


def _cmd_validate(args) -> int:
    cfg, errors = load_config(args.config)
    if errors:
        _report_errors(args.config, errors)
        return EXIT_CONFIG
    if not args.quiet:
        print(f"{args.config}: ok ({cfg.config_hash()[:12]})")
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg, errors = load_config(args.config)
    if errors:
        _report_errors(args.config, errors)
        return EXIT_CONFIG
    if args.seed is not None:
        if args.seed < 0:
            print("error: --seed must be non-negative", file=sys.stderr)
            return EXIT_CONFIG
        cfg = replace(cfg, base_seed=args.seed)
    if args.reuse is not None:
        cfg = replace(cfg, reuse=args.reuse == "on")
    if args.jobs is not None and args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        manifest = run_experiment(cfg, out_dir=args.out, jobs=args.jobs, quiet=args.quiet)
    except Exception as exc:
        print(f"error: experiment failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    n_fail = len(manifest["failures"])
    if n_fail:
        print(f"warning: {n_fail} of {manifest['num_tasks']} realizations failed; "
              "see manifest.json", file=sys.stderr)
    if n_fail == manifest["num_tasks"]:
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_default(args) -> int:
    name = f"defaults_{args.preset}.json"
    sys.stdout.write(resources.files("ulrrm.data").joinpath(name).read_text())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ulrrm",
        description="Uplink MU-MIMO resource management experiments (ZF stream strategies, "
                    "greedy search, MCS-aware power management).")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config", help="JSON experiment config")
    run.add_argument("--seed", type=int, help="override base_seed")
    run.add_argument("--jobs", type=int, help="worker processes")
    run.add_argument("--out", help=f"output directory (default: config, ${OUTPUT_ENV}, "
                                   "or ./ulrrm-results)")
    run.add_argument("--reuse", choices=["on", "off"], help="rate reuse in the search")
    run.add_argument("--quiet", action="store_true", help="no progress output")
    run.set_defaults(func=_cmd_run)

    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("config")
    val.add_argument("--quiet", action="store_true")
    val.set_defaults(func=_cmd_validate)

    dflt = sub.add_parser("default-config", help="print the reference parameter set as a config")
    dflt.add_argument("preset", choices=["uma", "rma"], nargs="?", default="uma")
    dflt.set_defaults(func=_cmd_default)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entrypoint: run, fit, count, validate, plot-data."""

import argparse
import sys
from pathlib import Path
from typing import Sequence

from pydantic import ValidationError

from harness.config import ExcitationMode, default_output_dir, load_config
from harness.report import fit_report, render_key_values, render_text, write_plot_data
from harness.runner import run_experiment
from harness.selfcheck import run_selfcheck
from kasteleyn import count_tilings_dp, count_tilings_product
from templates import COUNT_LINE
from utils.errors import ConfigMismatch, DimerLabError
from utils.logging import get_logger, set_level

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def _csv(value: str) -> list[str]:
    return [part.strip() for part in value.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dimerlab", description="Random dimer model excitations on periodic lattices")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("--quiet", action="store_true", help="warnings only, no progress bar")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run an experiment")
    run.add_argument("--config", type=Path, help="key=value config file")
    run.add_argument("--preset", choices=["desk", "full", "epsilon"])
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--out", type=Path)
    run.add_argument("--mode", choices=[m.value for m in ExcitationMode])
    run.add_argument("--kinds", type=_csv, help="e.g. H,Q,T")
    run.add_argument("--sizes", type=_csv, help="e.g. 8,16,32")
    run.add_argument("--instances", type=int)
    run.add_argument("--distribution", choices=["exponential", "uniform"])

    fit = commands.add_parser("fit", help="fit exponents from a record file")
    fit.add_argument("records", type=Path, nargs="?", help="records.csv or run directory")
    fit.add_argument("--config", type=Path, help="config supplying fit windows and bootstrap settings")
    fit.add_argument("--mode", choices=[m.value for m in ExcitationMode])
    fit.add_argument("--seed", type=int)
    fit.add_argument("--winding-only", action="store_true", help="kappa from winding loops only")
    fit.add_argument("--kv", action="store_true", help="key=value output instead of the table")

    count = commands.add_parser("count", help="exact domino tilings of an m x n grid")
    count.add_argument("m", type=int)
    count.add_argument("n", type=int)

    commands.add_parser("validate", help="lattice, solver and counting self-checks")

    plot = commands.add_parser("plot-data", help="two-column data files for plotting")
    plot.add_argument("records", type=Path, nargs="?", help="records.csv or run directory")
    plot.add_argument("--out", type=Path, help="directory for the .dat files")
    plot.add_argument("--mode", choices=[m.value for m in ExcitationMode])
    return parser


def cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config, {
        "preset": args.preset,
        "seed": args.seed,
        "workers": args.workers,
        "out": args.out,
        "mode": args.mode,
        "kinds": args.kinds,
        "sizes": args.sizes,
        "instances": args.instances,
        "distribution": args.distribution,
    })
    manifest = run_experiment(config, quiet=args.quiet)
    logger.info(f"Run finished in {manifest.wall_clock_seconds}s with {len(manifest.failures)} failures")
    return EXIT_FAILED if manifest.failures else EXIT_OK


def cmd_fit(args: argparse.Namespace) -> int:
    settings = {}
    if args.config is not None:
        config = load_config(args.config)
        settings = dict(
            zeta_window=config.zeta_window,
            epsilon_cut=config.epsilon_cut,
            n_boot=config.n_boot,
            seed=config.seed,
            winding_only=config.winding_only,
        )
    if args.seed is not None:
        settings["seed"] = args.seed
    if args.winding_only:
        settings["winding_only"] = True

    report = fit_report(args.records or default_output_dir(), args.mode, **settings)
    print(render_key_values(report) if args.kv else render_text(report), end="")
    return EXIT_OK


def cmd_count(args: argparse.Namespace) -> int:
    if args.m < 1 or args.n < 1:
        print(f"count: grid dimensions must be positive, got {args.m} {args.n}", file=sys.stderr)
        return EXIT_USAGE
    print(COUNT_LINE.format(label="dp", m=args.m, n=args.n, value=count_tilings_dp(args.m, args.n)))
    print(COUNT_LINE.format(label="product", m=args.m, n=args.n, value=round(count_tilings_product(args.m, args.n))))
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    results = run_selfcheck()
    for result in results:
        print(f"{'PASS' if result.passed else 'FAIL'} {result.name}: {result.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


def cmd_plot_data(args: argparse.Namespace) -> int:
    records = args.records or default_output_dir()
    out = args.out or (records if records.is_dir() else records.parent) / "plot"
    for path in write_plot_data(records, out, args.mode):
        print(path)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "fit": cmd_fit,
    "count": cmd_count,
    "validate": cmd_validate,
    "plot-data": cmd_plot_data,
}


def main(argv: Sequence[str] | None = None) -> int:
    """Dispatch a subcommand.

    Returns:
        0 on success, 1 when an instance, check or fit failed, 2 on usage errors.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    if args.verbose:
        set_level("DEBUG")
    elif args.quiet:
        set_level("WARNING")

    try:
        return COMMANDS[args.command](args)
    except (FileNotFoundError, ValidationError, ValueError, ConfigMismatch) as e:
        print(f"{args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DimerLabError as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())

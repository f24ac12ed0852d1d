"""
Command-line interface for the bellsim analytic engine and Monte Carlo simulator.

Results go to stdout as CSV or plain text; logs go to stderr.
"""

import argparse
import logging
import math
import sys
from collections.abc import Sequence

from . import __version__
from .commands import (
    EXIT_CONFIG,
    EXIT_DATA,
    FIG1_GAMMAS,
    FIG1_THETA_MAX,
    FIG1_THETA_MIN,
    CommandResult,
    cmd_analytic_sweep,
    cmd_beta_report,
    cmd_no_signaling_audit,
    cmd_reproduce_fig1,
    cmd_simulate,
)
from .config import get_settings, load_config
from .engine.simulation import DEFAULT_CHUNK_SIZE
from .exceptions import ConfigurationError, InsufficientDataError

logger = logging.getLogger("bellsim")

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors (exit 1), not argparse's exit 2."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise ConfigurationError(f"{self.prog}: {message}")


def _gammas(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ConfigurationError(f"invalid gamma list {text!r}") from e
    if not values:
        raise ConfigurationError("at least one gamma is required")
    return values


def _angle(value: float, degrees: bool) -> float:
    radians = math.radians(value) if degrees else value
    # the θ family reaches 3θ
    if not math.isfinite(3.0 * radians):
        raise ConfigurationError(f"angle {value} does not give finite settings angles")
    return radians


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="bellsim",
        description="CHSH measurement-dependence analytic engine and Monte Carlo simulator",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s analytic-sweep --steps 101 --gammas 1,0.8,0.5
  %(prog)s simulate --config run.json
  %(prog)s reproduce-fig1 --events 100000 --seed 7
  %(prog)s no-signaling-audit --config run.json
  %(prog)s --degrees beta-report --theta 225
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--degrees", action="store_true", help="Read input angles as degrees")
    parser.add_argument("--log-level", help="Logging level (default from BELLSIM_LOG_LEVEL)")
    parser.add_argument("--workers", type=int, help="Worker threads for simulation chunks")

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    sweep = subparsers.add_parser("analytic-sweep", help="Closed-form β curves as CSV")
    sweep.add_argument("--theta-min", type=float, default=FIG1_THETA_MIN)
    sweep.add_argument("--theta-max", type=float, default=FIG1_THETA_MAX)
    sweep.add_argument("--steps", type=int, default=101)
    sweep.add_argument("--gammas", type=_gammas, default=list(FIG1_GAMMAS))

    simulate = subparsers.add_parser("simulate", help="Run one configured simulation")
    simulate.add_argument("--config", required=True, help="JSON configuration file, '-' for stdin")

    fig1 = subparsers.add_parser("reproduce-fig1", help="Analytic vs simulated β over θ ∈ [π, 2π]")
    fig1.add_argument("--events", type=int, required=True, help="Events per grid point")
    fig1.add_argument("--seed", type=int, help="Master seed (default BELLSIM_SEED)")
    fig1.add_argument("--steps", type=int, default=41)
    fig1.add_argument("--chunk-size", type=int, default=DEFAULT_CHUNK_SIZE)

    audit = subparsers.add_parser("no-signaling-audit", help="Simulate and audit singles and ξ")
    audit.add_argument("--config", required=True, help="JSON configuration file, '-' for stdin")

    report = subparsers.add_parser("beta-report", help="Mixture vs printed β at one θ")
    report.add_argument("--theta", type=float, required=True)
    report.add_argument("--gammas", type=_gammas, default=list(FIG1_GAMMAS))

    return parser


def _configure_logging(level_name: str) -> None:
    level = logging.getLevelName(level_name.upper())
    if not isinstance(level, int):
        raise ConfigurationError(f"unknown log level {level_name!r}")
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def _dispatch(args: argparse.Namespace) -> CommandResult:
    settings = get_settings()
    workers = args.workers if args.workers is not None else settings.max_workers
    if workers is not None and workers < 1:
        raise ConfigurationError(f"--workers must be at least 1, got {workers}")

    if args.command == "analytic-sweep":
        return cmd_analytic_sweep(
            _angle(args.theta_min, args.degrees),
            _angle(args.theta_max, args.degrees),
            args.steps,
            args.gammas,
        )

    if args.command == "beta-report":
        return cmd_beta_report(_angle(args.theta, args.degrees), args.gammas)

    if args.command in ("simulate", "no-signaling-audit"):
        config = load_config(args.config, degrees=args.degrees, settings=settings)
        if args.command == "simulate":
            return cmd_simulate(config, max_workers=workers)
        return cmd_no_signaling_audit(config, max_workers=workers)

    # reproduce-fig1
    if args.seed is not None:
        seed, seed_source = args.seed, "cli"
    elif settings.seed is not None:
        seed, seed_source = settings.seed, "env"
    else:
        raise ConfigurationError("reproduce-fig1 needs --seed or BELLSIM_SEED")
    if not 0 <= seed < 2**64:
        raise ConfigurationError(f"seed must lie in [0, 2^64), got {seed}")
    if args.events < 1:
        raise ConfigurationError(f"--events must be positive, got {args.events}")
    if args.chunk_size < 1:
        raise ConfigurationError(f"--chunk-size must be at least 1, got {args.chunk_size}")
    return cmd_reproduce_fig1(
        args.events,
        seed,
        steps=args.steps,
        chunk_size=args.chunk_size,
        max_workers=workers,
        seed_source=seed_source,
    )


def main(argv: Sequence[str] | None = None) -> int:
    """Run the CLI and return the process exit code."""
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        _configure_logging(args.log_level or get_settings().log_level)

        if not args.command:
            parser.print_help(sys.stderr)
            return EXIT_CONFIG

        result = _dispatch(args)
    except ConfigurationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except InsufficientDataError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA

    sys.stdout.write(result.output)
    sys.stdout.flush()
    return result.exit_code


def cli_main() -> None:
    """Console-script entry point."""
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\nInterrupted", file=sys.stderr)
        sys.exit(130)


if __name__ == "__main__":
    cli_main()

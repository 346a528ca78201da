import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from relnet.api import RUNNERS
from relnet.api.validation import load_config, validate_config
from relnet.db.session import get_writer
from relnet.exceptions import ConfigError, Diagnostic, RelnetError
from relnet.schemas.experiment import EXPERIMENT_KINDS, RunOptions
from relnet.settings import DEFAULT_SAMPLES, DEFAULT_SEED, DEFAULT_SHARDS, DEFAULT_THREADS, default_output_dir

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

logger = logging.getLogger("relnet")


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relnet",
        description="Reliability, repair statistics and key rates of multiplexed repeater networks",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    for kind in EXPERIMENT_KINDS:
        command = commands.add_parser(kind, help=f"run a {kind} experiment")
        command.add_argument("--config", type=Path, required=True, help="Path to config YAML")
        command.add_argument("--seed", type=int, help="Override the config seed")
        command.add_argument("--out", type=Path, help="Output directory")
        command.add_argument("--samples", type=positive_int, help="Monte Carlo samples per key-rate point or windows per repair check")
        command.add_argument("--threads", type=positive_int, help="Worker threads")
        command.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    check = commands.add_parser("validate", help="check a config without running it")
    check.add_argument("--config", type=Path, required=True, help="Path to config YAML")
    check.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    return parser


def resolve_options(args: argparse.Namespace, config) -> RunOptions:
    def pick(flag, value, default):
        if flag is not None:
            return flag
        return value if value is not None else default

    # samples per key-rate point, or Monte Carlo windows of the repair check
    protocol = getattr(config, "protocol", None)
    monte_carlo = getattr(config, "monte_carlo", None)
    if protocol is not None:
        fallback_samples = protocol.samples
    elif monte_carlo is not None:
        fallback_samples = monte_carlo.windows
    else:
        fallback_samples = DEFAULT_SAMPLES
    return RunOptions(
        seed=pick(args.seed, config.seed, DEFAULT_SEED),
        samples=pick(args.samples, config.samples, fallback_samples),
        threads=pick(args.threads, config.threads, DEFAULT_THREADS),
        shards=DEFAULT_SHARDS,
    )


def run_experiment(args: argparse.Namespace) -> int:
    config, digest = load_config(args.config)
    if config.experiment != args.command:
        raise ConfigError(
            f"{args.config} describes a {config.experiment} experiment, not {args.command}",
            [Diagnostic("experiment", f"expected {args.command!r}, found {config.experiment!r}")],
        )
    options = resolve_options(args, config)
    out_dir = args.out or (Path(config.output_dir) if config.output_dir else default_output_dir() / args.command)
    logger.info("running %s into %s (seed %d, %d threads)", args.command, out_dir, options.seed, options.threads)
    with get_writer(
        out_dir, args.command, digest, seed=options.seed, samples=options.samples, threads=options.threads
    ) as writer:
        RUNNERS[args.command](config, writer, options)
    logger.info("done: %d files in %s", len(writer.artifacts), out_dir)
    return 0


def run_validate(args: argparse.Namespace) -> int:
    notes = validate_config(args.config)
    print(f"{args.config}: ok")
    for note in notes:
        print(f"note: {note}")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)
    try:
        if args.command == "validate":
            return run_validate(args)
        return run_experiment(args)
    except RelnetError as exc:
        logger.error("%s", exc.detail)
        for diagnostic in getattr(exc, "diagnostics", []):
            print(f"error: {diagnostic}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())

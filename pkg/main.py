import argparse
import glob
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

from ts_client import COMMANDS, EXIT_INVALID, EXIT_OK, TreeShiftClient
from ts_exceptions import (
    ConfigError,
    TreeShiftException,
    UnknownCommandError,
    ValidationError,
)

logger = logging.getLogger(__name__)

FORMATS = ("text", "csv", "json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsent",
        description="Entropy of Markov tree shifts on Cayley trees",
    )
    parser.add_argument("command", help=f"one of {', '.join(COMMANDS)}")
    parser.add_argument("config", nargs="?", help="YAML system config")
    parser.add_argument("--iters", dest="max_iters", type=int, help="iteration cap (at most 600)")
    parser.add_argument("--eps", type=float, help="relative convergence tolerance")
    parser.add_argument("--log-base", dest="log_base", choices=("e", "2", "10"))
    parser.add_argument("--depth", type=int, help="depth for oracle tables and analyze sizes")
    parser.add_argument("--format", dest="fmt", choices=FORMATS, default="text")
    parser.add_argument("--batch", metavar="DIR", help="run the command on every *.yml/*.yaml in DIR")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


def flags_from(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "max_iters": args.max_iters,
        "eps": args.eps,
        "log_base": args.log_base,
        "depth": args.depth,
    }


def get_report(command: str) -> type:
    try:
        return COMMANDS[command]
    except KeyError:
        raise UnknownCommandError(
            f"unknown command {command!r}", detail=f"choose from {', '.join(COMMANDS)}"
        ) from None


def run(command: str, config: str, flags: Optional[Dict[str, Any]] = None) -> TreeShiftClient:
    """Load ``config``, run ``command`` and return the finished report client"""
    report_class = get_report(command)
    client = report_class(config_file=config, flags=flags or {})
    client.run()
    return client


def run_one(command: str, config: str, flags: Dict[str, Any], fmt: str) -> Tuple[str, int]:
    try:
        client = run(command, config, flags)
    except (ConfigError, ValidationError) as e:
        logger.error(f"Invalid input {config}: {e}")
        return "", EXIT_INVALID
    except TreeShiftException as e:
        logger.error(f"{command} failed on {config}: {e}")
        return "", EXIT_INVALID
    return client.render(fmt), client.exit_code


def batch_configs(directory: str) -> List[str]:
    if not os.path.isdir(directory):
        raise ConfigError(f"batch directory {directory} not found")
    paths = glob.glob(os.path.join(directory, "*.yml")) + glob.glob(os.path.join(directory, "*.yaml"))
    return sorted(paths, key=os.path.basename)


def run_batch(command: str, directory: str, flags: Dict[str, Any], fmt: str) -> Tuple[List[Tuple[str, str]], int]:
    """Independent systems in parallel; outputs keyed and ordered by file name"""
    paths = batch_configs(directory)
    logger.info(f"Running {command} on {len(paths)} config(s) in {directory}")
    with ThreadPoolExecutor() as executor:
        results = list(executor.map(lambda path: run_one(command, path, flags, fmt), paths))
    outputs = [(os.path.basename(path), output) for path, (output, _) in zip(paths, results)]
    exit_code = max((code for _, code in results), default=EXIT_OK)
    return outputs, exit_code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    flags = flags_from(args)

    try:
        get_report(args.command)
        if args.batch:
            outputs, exit_code = run_batch(args.command, args.batch, flags, args.fmt)
            for name, output in outputs:
                print(f"### {name}")
                if output:
                    print(output)
            return exit_code
        if not args.config:
            raise ConfigError("a config path is required unless --batch is given")
    except TreeShiftException as e:
        logger.error(str(e))
        return EXIT_INVALID

    output, exit_code = run_one(args.command, args.config, flags, args.fmt)
    if output:
        print(output)
    return exit_code


if __name__ == "__main__":
    sys.exit(main())

"""
Command-line entry point: dnlab run | verify | list-scenarios.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .errors import ConfigError
from .pipeline.scenario import EXIT_CONFIG, EXIT_OK, record_config_failure, run_scenario
from .pipeline.scenarios import BUILTIN_SCENARIOS, get_scenario, list_scenarios
from .pipeline.verify import verify
from .utils.config import ScenarioLoader, default_output_root

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dnlab",
        description="Semilinear parabolic DN-map laboratory: forward solves, linearization, "
                    "reconstruction and stability experiments.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="Logging verbosity (default: INFO)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run a scenario from a config file or the builtin list")
    source = run.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", type=str, help="Path to a JSON scenario file")
    source.add_argument("--scenario", type=str, help="Name of a builtin scenario")
    run.add_argument("--output", type=str, default=None,
                     help="Output directory (default: $DNLAB_OUTPUT_ROOT/<scenario>)")
    run.add_argument("--seed", type=int, default=None, help="Override the scenario seed")
    run.add_argument("--threads", type=int, default=None, help="Override the worker thread count")

    check = sub.add_parser("verify", help="Compare a run directory against golden outputs")
    check.add_argument("golden_dir", type=str)
    check.add_argument("output_dir", type=str)
    check.add_argument("--rtol", type=float, default=1e-9)
    check.add_argument("--atol", type=float, default=1e-12)
    check.add_argument("--report", type=str, default=None, help="Write the diff report as JSON")

    sub.add_parser("list-scenarios", help="List builtin scenarios")
    return parser


def _write_config_error(error: ConfigError, output: Optional[str], scenario: str) -> None:
    target = Path(output) if output else default_output_root() / scenario
    print(json.dumps(dict(error.to_dict(), exit_code=EXIT_CONFIG), sort_keys=True), file=sys.stderr)
    try:
        record_config_failure(error, target, scenario)
    except OSError as e:
        logger.error(f"Could not write error JSON to {target}: {e}")


def cmd_run(args: argparse.Namespace) -> int:
    try:
        config = ScenarioLoader(args.config).load() if args.config else get_scenario(args.scenario)
        if args.seed is not None:
            config.seed = args.seed
        if args.threads is not None:
            config.threads = args.threads
        config.validate()
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        scenario = args.scenario or Path(args.config).stem
        _write_config_error(e, args.output, scenario)
        return EXIT_CONFIG
    code, manifest = run_scenario(config, args.output)
    if manifest.error is not None:
        print(json.dumps(dict(manifest.error, exit_code=code), sort_keys=True, default=str), file=sys.stderr)
    print(f"{manifest.scenario}: {manifest.status} (exit {code})")
    return code


def cmd_verify(args: argparse.Namespace) -> int:
    try:
        report = verify(args.golden_dir, args.output_dir, args.rtol, args.atol)
    except FileNotFoundError as e:
        logger.error(str(e))
        return 1
    for f in report.files:
        if f.status != "pass":
            print(f"{f.status:8s} {f.path} {f.detail} {f.location or ''}".rstrip())
    print("PASS" if report.passed else "FAIL")
    if args.report:
        with open(args.report, "w") as f:
            json.dump(report.to_dict(), f, indent=2, sort_keys=True)
    return EXIT_OK if report.passed else 1


def cmd_list(args: argparse.Namespace) -> int:
    for name in list_scenarios():
        print(f"{name:24s} {BUILTIN_SCENARIOS[name]['experiment']}")
    return EXIT_OK


def cli(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    commands = {"run": cmd_run, "verify": cmd_verify, "list-scenarios": cmd_list}
    return commands[args.command](args)


def main():
    sys.exit(cli())


if __name__ == "__main__":
    main()

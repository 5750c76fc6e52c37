"""Command-line front end: kinetic-market simulate | equilibrium | validate | inspect-config."""

import argparse
import json
import sys
from typing import List, Optional

from .config.constants import EngineKind, EquilibriumKind, ExitCode
from .config.loader import load_scenario
from .core.laboratory import Laboratory, LabResult
from .models.errors import ConfigError, KineticError
from .utils.error_formatter import format_error_message, format_violations
from .utils.logging_setup import configure_logging
from .utils.manifest import jsonable


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kinetic-market",
        description="Simulate and analyse two-phase kinetic market models",
    )
    parser.add_argument("--verbose", "-v", action="store_true",
                        help="Log at DEBUG level (overrides KM_LOG)")
    commands = parser.add_subparsers(dest="command", required=True)

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--scenario", required=True, help="Path to the scenario JSON file")
        return sub

    simulate = command("simulate", "Run the particle or fluid engine")
    simulate.add_argument("--engine", default=EngineKind.FLUID.value,
                          choices=[k.value for k in EngineKind])
    simulate.add_argument("--out", help="Output directory (default: scenario outputs.directory)")
    simulate.add_argument("--seed", type=int, help="First replica seed")
    simulate.add_argument("--replicas", type=int, help="Number of particle replicas")

    equilibrium = command("equilibrium", "Compute a closed-form equilibrium")
    equilibrium.add_argument("--kind", default=EquilibriumKind.FIXED.value,
                             choices=[k.value for k in EquilibriumKind])
    equilibrium.add_argument("--gamma-plus", type=float, help="Boundary density of the (+)-phase")
    equilibrium.add_argument("--gamma-minus", type=float, help="Boundary density of the (-)-phase")
    equilibrium.add_argument("--s-bar", type=float, nargs="+",
                             help="Network annihilation flows, one per market")
    equilibrium.add_argument("--out", help="Output directory")

    validate = command("validate", "Run the cross-engine validation criteria")
    validate.add_argument("--out", help="Output directory")

    command("inspect-config", "Print tier, derived constants and the admissible dt")
    return parser


def _emit(result: LabResult) -> None:
    payload = dict(result.report)
    if result.manifest:
        payload["manifest"] = result.manifest
    print(json.dumps(jsonable(payload), indent=2, sort_keys=True))


def dispatch(args: argparse.Namespace, lab: Laboratory) -> LabResult:
    scenario = load_scenario(args.scenario)
    if args.command == "simulate":
        return lab.simulate(scenario, args.engine, args.out, args.seed, args.replicas)
    if args.command == "equilibrium":
        return lab.equilibrium(scenario, args.kind, args.gamma_plus, args.gamma_minus,
                               args.s_bar, args.out)
    if args.command == "validate":
        return lab.validate(scenario, args.out)
    return lab.inspect(scenario)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Entry point.

    Returns:
        0 on success, 1 for configuration errors, 2 for runtime errors,
        3 when a validation criterion fails
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(verbose=args.verbose)

    try:
        result = dispatch(args, Laboratory())
    except ConfigError as exc:
        print(format_error_message(exc.message, error_type=exc.error_type), file=sys.stderr)
        if exc.violations:
            print(format_violations(exc.violations), file=sys.stderr)
        return int(ExitCode.CONFIG_ERROR)
    except KineticError as exc:
        print(str(exc), file=sys.stderr)
        return int(ExitCode.RUNTIME_ERROR)

    _emit(result)
    return int(result.exit_code)


if __name__ == "__main__":
    sys.exit(main())

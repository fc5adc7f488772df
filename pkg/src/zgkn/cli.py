#!/usr/bin/env python3
"""Unified CLI for zgkn.

This module provides a single entry point `zgkn` with subcommands for every
part of the lab:
    - zgkn spectrum: Scan an energy window for separated eigenstates
    - zgkn angular: Solve the angular eigenproblem at one energy
    - zgkn state: Solve one eigenstate and save it (and optionally a grid)
    - zgkn trajectory: Integrate guiding-law trajectories
    - zgkn interaction: Mutual field-energy integrals versus closed forms
    - zgkn fields: Tabulate the ring's potentials and fields
    - zgkn verify: Run the acceptance checks
    - zgkn convert: Convert lengths between hbar/mc and meters

Example:
    $ zgkn spectrum --a 1e-6 --gamma -0.0072973525 --kappa-list -0.5 --window -1,1
    $ zgkn state --a 0.05 --gamma -0.25 --kappa -0.5 --branch -1 -o ground.json
    $ zgkn trajectory --state-file ground.json --q0 0,4,1,0 --tau-span 0,40
    $ zgkn verify --quick
"""

import argparse
import logging
import sys

from . import __version__
from .bohm import add_trajectory_arguments, run_trajectory
from .colors import get_colors
from .config import add_common_arguments
from .errors import ConfigError, ZgknError
from .fields import add_fields_arguments, run_fields
from .geometry import HEADLINE_RING_RADIUS, compton_to_si, si_to_compton
from .interaction import add_interaction_arguments, run_interaction
from .results import ResultEnvelope, canonical_json, emit_result, sha256_of
from .spectral import (
    add_angular_arguments,
    add_spectrum_arguments,
    add_state_arguments,
    run_angular,
    run_spectrum,
    run_state,
)
from .verify import add_verify_arguments, run_verify

logger = logging.getLogger(__name__)


def add_convert_arguments(parser: argparse.ArgumentParser) -> None:
    """Add convert command arguments to a parser."""
    parser.add_argument(
        "--length",
        type=float,
        default=HEADLINE_RING_RADIUS,
        help=f"Length to convert (default: {HEADLINE_RING_RADIUS}, the headline ring radius)",
    )
    parser.add_argument(
        "--from",
        dest="unit",
        choices=["compton", "si"],
        default="compton",
        help="Unit of --length: hbar/mc or meters (default: compton)",
    )
    add_common_arguments(parser)


def run_convert(args: argparse.Namespace) -> None:
    """Execute the convert command with parsed arguments."""
    if getattr(args, "config", None):
        raise ConfigError("convert takes no configuration file")
    if args.unit == "compton":
        compton, si = args.length, compton_to_si(args.length)
    else:
        compton, si = si_to_compton(args.length), args.length
    section = {"length": args.length, "from": args.unit}
    payload = {"compton": compton, "meters": si}
    envelope = ResultEnvelope(command="convert", config_hash=sha256_of(section), payload=payload)
    rows = [payload]
    text = f"{compton:.10g} hbar/mc = {si:.10g} m"
    emit_result(envelope, args, rows, ("compton", "meters"), text)


def _configure_logging(args: argparse.Namespace) -> None:
    if args.debug:
        level = logging.DEBUG
    elif args.verbose:
        level = logging.INFO
    else:
        level = logging.WARNING
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s", force=True
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zgkn",
        description="Numerical lab for the Dirac equation on the zero-gravity Kerr-Newman"
        " spacetime",
        epilog="Run 'zgkn <command> --help' for more information on a command.",
    )
    parser.add_argument("-v", "--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--verbose", action="store_true", help="Log progress to stderr")
    parser.add_argument("--debug", action="store_true", help="Log solver detail to stderr")

    subparsers = parser.add_subparsers(dest="command", metavar="<command>")

    spectrum_parser = subparsers.add_parser(
        "spectrum",
        help="Scan an energy window for eigenstates",
        description="Enumerate separated eigenstates by winding-cell sign changes.",
        epilog="Example: zgkn spectrum --a 1e-6 --gamma -0.0072973525 --kappa-list -0.5",
    )
    add_spectrum_arguments(spectrum_parser)

    angular_parser = subparsers.add_parser(
        "angular",
        help="Solve the angular eigenproblem",
        description="Solve the angular problem at one energy and compare with the dense oracle.",
        epilog="Example: zgkn angular --a 0.1 --gamma -0.25 --energy 0.9 --kappa 0.5 --branch 1",
    )
    add_angular_arguments(angular_parser)

    state_parser = subparsers.add_parser(
        "state",
        help="Solve and save one eigenstate",
        description="Solve one separated eigenstate; optionally sample it on a grid.",
        epilog="Example: zgkn state --a 0.05 --gamma -0.25 --kappa -0.5 --branch -1 -o ground.json",
    )
    add_state_arguments(state_parser)

    trajectory_parser = subparsers.add_parser(
        "trajectory",
        help="Integrate guiding-law trajectories",
        description="Integrate the point charge's worldline and Dreibein in a guiding field.",
        epilog="Example: zgkn trajectory --state-file ground.json --q0 0,4,1,0 --tau-span 0,40",
    )
    add_trajectory_arguments(trajectory_parser)

    interaction_parser = subparsers.add_parser(
        "interaction",
        help="Evaluate the mutual field-energy integrals",
        description="Integrate P0 and Pj over the excised double-sheeted space.",
        epilog="Example: zgkn interaction --a 1 --charge 1 --point-charge 1 --qpt 2,0.3,0",
    )
    add_interaction_arguments(interaction_parser)

    fields_parser = subparsers.add_parser(
        "fields",
        help="Tabulate the ring's potentials and fields",
        description="Sample potentials and fields on a ring-centered (xi, eta) grid.",
        epilog="Example: zgkn fields --a 1 --charge 1 --xi -2,2 --eta 0.5 -o slice.csv",
    )
    add_fields_arguments(fields_parser)

    verify_parser = subparsers.add_parser(
        "verify",
        help="Run the acceptance checks",
        description="Run the acceptance checks and print a pass/fail table.",
        epilog="Example: zgkn verify --quick",
    )
    add_verify_arguments(verify_parser)

    convert_parser = subparsers.add_parser(
        "convert",
        help="Convert lengths between hbar/mc and meters",
        description="Convert a length between reduced Compton wavelengths and meters.",
        epilog="Example: zgkn convert --length 5.83e-4",
    )
    add_convert_arguments(convert_parser)
    return parser


_COMMANDS = {
    "spectrum": run_spectrum,
    "angular": run_angular,
    "state": run_state,
    "trajectory": run_trajectory,
    "interaction": run_interaction,
    "fields": run_fields,
    "verify": run_verify,
    "convert": run_convert,
}


def main():
    """Unified command-line interface for zgkn.

    Usage:
        zgkn spectrum [model flags] [--kappa-list K] [--window LO,HI] [--json]
        zgkn angular [model flags] --energy E --kappa K --branch N
        zgkn state [model flags] --kappa K --branch N [--grid FILE] [-o FILE]
        zgkn trajectory --state-file FILE [--q0 T,R,THETA,PHI] [--tau-span A,B]
        zgkn interaction [model flags] --qpt XI,ETA,PHI [--eps-ladder E1,E2,...]
        zgkn fields [model flags] [--xi X1,X2,...] [--eta E1,E2,...]
        zgkn verify [--quick] [--state-file FILE]
        zgkn convert [--length L] [--from compton|si]

    Exit status is 0 on success, 2 for configuration errors and 3 for
    numerical failures (including failed verify checks).
    """
    parser = build_parser()
    args = parser.parse_args()
    _configure_logging(args)

    if args.command is None:
        parser.print_help()
        sys.exit(0)

    try:
        _COMMANDS[args.command](args)
    except ZgknError as e:
        colors = get_colors(getattr(args, "no_color", False))
        print(colors.error(f"error: {e.message}"), file=sys.stderr)
        logger.debug("%s details: %s", type(e).__name__, e.details)
        if getattr(args, "json", False):
            print(canonical_json(e.to_dict(), compact=getattr(args, "compact", False)))
        sys.exit(e.exit_code)


if __name__ == "__main__":
    main()

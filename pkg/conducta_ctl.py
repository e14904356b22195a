#!/usr/bin/env python3
"""
Conducta CLI
============

Command-line entry point for the conductive transmission toolkit. Every
subcommand is a Command subclass found in the commands/ package at start-up;
the response dict is printed to stdout as JSON, logs go to stderr and the
rotating log file.

Usage:
    conducta_ctl <command> [--config FILE] [--out DIR] [flags...]

Examples:
    conducta_ctl forward --config configs/disk.json --out runs/forward
    conducta_ctl oracle-compare --config configs/disk.json
    conducta_ctl farfield-matrix --config configs/disk.json --grid 16 --noise 0.01
    conducta_ctl lsm --config configs/kite.json --grid 32 --out runs/lsm
    conducta_ctl singularity --config configs/disk.json --J 16 --delta 0.1
    conducta_ctl itp-check --k 1 --n1 0.5 --n2 1 --eta 1 --R 1
    conducta_ctl itp-radius --k 1 --n1 0.5 --n2 1 --eta 1

Exit codes:
    0  success
    1  invalid input (violated invariant, unknown subcommand, bad flags)
    2  numerical failure (resonance, rank-deficient regression, regularization)
"""

import argparse
import importlib
import inspect
import logging
import os
import sys

from commands.base import Command
from conducta import __version__
from conducta.runio import to_json
from conducta.settings import load_settings, setup_logging

log = logging.getLogger("conducta_ctl")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2


class UsageError(Exception):
    """Raised instead of argparse's SystemExit so usage problems map to exit code 1."""


class _Parser(argparse.ArgumentParser):

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def discover_commands():
    """
    Auto-discover Command subclasses from the commands package.
    Scans all .py files in commands/ for concrete classes that extend Command.
    """
    import commands

    found = {}
    commands_dir = os.path.dirname(commands.__file__)
    for filename in sorted(os.listdir(commands_dir)):
        if filename.startswith("_") or not filename.endswith(".py"):
            continue
        module_name = filename[:-3]
        try:
            mod = importlib.import_module(f"commands.{module_name}")
        except ImportError as e:
            log.warning("Failed to load commands.%s: %s", module_name, e)
            continue
        for attr_name in dir(mod):
            attr = getattr(mod, attr_name)
            if (
                inspect.isclass(attr)
                and issubclass(attr, Command)
                and not inspect.isabstract(attr)
                and attr.__module__ == mod.__name__
            ):
                instance = attr()
                found[instance.name] = instance
                log.debug("Discovered command: %s (%s)", instance.name, instance.description)
    return found


def _shared_flags():
    shared = _Parser(add_help=False)
    shared.add_argument("--config", help="scatterer config JSON")
    shared.add_argument("--out", help="output directory (files + manifest); stdout only when omitted")
    shared.add_argument("--N", type=int, help="boundary nodes on the outer curve")
    shared.add_argument("--J", type=int, help="number of sources in singularity experiments")
    shared.add_argument("--delta", type=float, help="source offset δ (default: 0.05·diam)")
    shared.add_argument("--grid", type=int, help="angle grid size")
    shared.add_argument("--alpha", type=float, help="sampling-method regularization parameter")
    shared.add_argument("--noise", type=float, default=0.0, help="relative far-field noise level (default: 0)")
    shared.add_argument("--seed", type=int, default=0, help="noise seed recorded in the manifest (default: 0)")
    return shared


def build_parser(commands):
    parser = _Parser(prog="conducta_ctl", description="Conductive transmission scattering toolkit")
    parser.add_argument("--version", action="version", version=f"conducta {__version__}")
    subparsers = parser.add_subparsers(dest="command", metavar="<command>")
    shared = _shared_flags()
    for name in sorted(commands):
        command = commands[name]
        sub = subparsers.add_parser(name, help=command.description, parents=[shared])
        command.add_arguments(sub)
    return parser


def exit_code(response):
    if response.get("ok"):
        return EXIT_OK
    return EXIT_NUMERICAL if response.get("kind") == "numerical" else EXIT_INVALID


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    settings = load_settings()
    setup_logging(settings, to_file=True)

    commands = discover_commands()
    parser = build_parser(commands)

    if not argv or (not argv[0].startswith("-") and argv[0] not in commands):
        if argv:
            print(f"conducta_ctl: unknown command '{argv[0]}'", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_INVALID

    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_INVALID

    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_INVALID

    log.info("Running %s", args.command)
    response = commands[args.command].run(args, settings)
    print(to_json(response))
    if not response["ok"]:
        log.error("%s failed: %s", args.command, response["error"])
    return exit_code(response)


if __name__ == "__main__":
    sys.exit(main())

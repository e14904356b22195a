"""
Command - Abstract Base Class
=============================

Every CLI subcommand (forward, lsm, itp-check, ...) implements this
interface. conducta_ctl discovers commands through this contract by
scanning the commands package, the same way subclasses are found at start-up.

Lifecycle:
    1. __init__()       - Command is instantiated (no work yet).
    2. add_arguments()  - Subcommand-specific flags are registered.
    3. run()            - Called once with the parsed arguments; returns a
                          response dict and never raises ConductaError.
"""

import json
import os
from abc import ABC, abstractmethod

from conducta.errors import ConductaError, NumericalError, ValidationError, Violation
from conducta.geometry import load_scatterer, parse_incidence, plane_wave
from conducta.runio import RunManifest, write_manifest


class Command(ABC):
    """
    Base class for all conducta subcommands.

    Properties:
        name (str):        Subcommand name used on the command line (e.g. "forward").
        description (str): One-line help text.
    """

    @property
    @abstractmethod
    def name(self) -> str:
        ...

    @property
    @abstractmethod
    def description(self) -> str:
        ...

    def add_arguments(self, parser) -> None:
        """Register subcommand-specific flags. Shared flags are added by the CLI."""

    @abstractmethod
    def execute(self, args, settings) -> dict:
        """
        Do the work and return the JSON-serializable report.

        Raise ConductaError subclasses on failure; run() turns them into
        error responses.
        """
        ...

    def run(self, args, settings) -> dict:
        """
        Returns:
            {"ok": True, "data": {...}}                           on success
            {"ok": False, "error": "...", "kind": "validation"}   on bad input
            {"ok": False, "error": "...", "kind": "numerical"}    on numerical failure
        """
        try:
            return self._ok(self.execute(args, settings))
        except ValidationError as e:
            return self._err(str(e), "validation", violations=[v.as_dict() for v in e.violations])
        except NumericalError as e:
            return self._err(str(e), "numerical")
        except ConductaError as e:
            return self._err(str(e), "validation")

    # --- Shared helpers -----------------------------------------------------

    def _config(self, args):
        if not args.config:
            raise ValidationError([Violation("arguments", "--config is required")])
        try:
            return load_scatterer(args.config)
        except (OSError, json.JSONDecodeError) as e:
            raise ValidationError([Violation("config", f"cannot read {args.config}: {e}")])

    def _incidence(self, args):
        """--incidence JSON, else the config file's "incidence" entry, else a plane wave along +x."""
        if getattr(args, "incidence", None):
            return parse_incidence(json.loads(args.incidence))
        spec = self._config_entry(args, "incidence")
        return parse_incidence(spec) if spec else plane_wave(0.0)

    def _config_entry(self, args, key, default=None):
        """A top-level entry of the config JSON that is not part of the scatterer itself."""
        if not args.config:
            return default
        with open(args.config) as fh:
            return json.load(fh).get(key, default)

    def _resonance_threshold(self, args, settings):
        """The config's "solver.resonance_threshold" overrides the environment setting."""
        solver = self._config_entry(args, "solver", {})
        return float(solver.get("resonance_threshold", settings.resonance_threshold))

    def _output(self, args, filename):
        """Path inside --out, or None when no output directory was requested."""
        if not args.out:
            return None
        os.makedirs(args.out, exist_ok=True)
        return os.path.join(args.out, filename)

    def _manifest(self, args, options=None):
        if not args.out:
            return None
        manifest = RunManifest(
            command=self.name,
            config_path=args.config,
            output_dir=os.path.abspath(args.out),
            seed=args.seed,
            options=options,
        )
        write_manifest(manifest)
        return manifest

    # --- Response helpers ---------------------------------------------------

    def _ok(self, data=None):
        """Helper: build a success response."""
        result = {"ok": True, "command": self.name}
        if data is not None:
            result["data"] = data
        return result

    def _err(self, message, kind, **extra):
        """Helper: build an error response."""
        return {"ok": False, "command": self.name, "error": message, "kind": kind, **extra}

"""
Singularity Commands
====================

singularity - point sources marched onto x₀; fitted constants and λ̂(x₀)
dipole      - normal dipoles marched onto x₀ (λ = 1); fitted γ̂(x₀)
"""

from commands.base import Command
from conducta.runio import write_csv, write_json
from conducta.singlab import ENGINES, run_dipole_experiment, run_point_source_experiment

DEFAULT_J = 16


class _ExperimentCommand(Command):
    runner = None

    def add_arguments(self, parser):
        parser.add_argument("--engine", choices=ENGINES, default="bie", help="field engine (default: bie)")
        parser.add_argument("--t0", type=float, default=0.0, help="boundary parameter of x0 (default: 0)")

    def execute(self, args, settings):
        config = self._config(args)
        experiment = type(self).runner(
            config, t0=args.t0, delta=args.delta, J=args.J or DEFAULT_J,
            engine=args.engine, N=args.N, threads=settings.threads,
        )
        summary = experiment.summary()
        path = self._output(args, f"{self.name}.csv")
        if path:
            write_csv(path, experiment.rows())
            write_json(self._output(args, "summary.json"), summary)
            self._manifest(args, {"N": args.N, "J": args.J or DEFAULT_J, "delta": experiment.delta,
                                  "engine": args.engine, "t0": args.t0})
        return summary


class SingularityCommand(_ExperimentCommand):
    runner = staticmethod(run_point_source_experiment)

    @property
    def name(self):
        return "singularity"

    @property
    def description(self):
        return "Point-source singularity experiment and boundary lambda recovery"


class DipoleCommand(_ExperimentCommand):
    runner = staticmethod(run_dipole_experiment)

    @property
    def name(self):
        return "dipole"

    @property
    def description(self):
        return "Normal-dipole singularity experiment and boundary gamma recovery"

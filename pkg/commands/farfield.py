"""
Far-Field Commands
==================

farfield-matrix - u∞(θ_i; d_j) on equispaced grids, written as CSV
reciprocity     - audit u∞(x̂; d) = u∞(−d; −x̂)
distinguish     - relative far-field distance between two scatterers
lsm             - linear-sampling indicator on a search grid, with contour
"""

import numpy as np

from commands.base import Command
from conducta.errors import ValidationError, Violation
from conducta.geometry import load_scatterer
from conducta.inverse import (
    DEFAULT_GRID,
    ENGINES,
    distinguishability,
    far_field_matrix,
    hausdorff_distance,
    indicator_contour,
    lsm_indicator,
    reciprocity_check,
    search_grid,
)
from conducta.runio import read_farfield_csv, write_csv, write_farfield_csv, write_json

LSM_GRID = 32
SEARCH_POINTS = 64
BOX_MARGIN = 1.5


def _engine_flag(parser):
    parser.add_argument("--engine", choices=ENGINES, default="bie", help="field engine (default: bie)")


def _matrix(command, args, default_grid, threads=1):
    """Far-field matrix from --matrix CSV, or computed from --config."""
    if getattr(args, "matrix", None):
        try:
            return read_farfield_csv(args.matrix)
        except OSError as e:
            raise ValidationError([Violation("far field", f"cannot read {args.matrix}: {e}")])
    config = command._config(args)
    grid = args.grid or default_grid
    return far_field_matrix(
        config, grid, grid, args.N, engine=args.engine, noise=args.noise,
        seed=args.seed, threads=threads,
    )


class FarFieldMatrixCommand(Command):

    @property
    def name(self):
        return "farfield-matrix"

    @property
    def description(self):
        return "Plane-wave far-field matrix on equispaced grids"

    def add_arguments(self, parser):
        _engine_flag(parser)

    def execute(self, args, settings):
        matrix = _matrix(self, args, DEFAULT_GRID, settings.threads)
        report = {
            "shape": list(matrix.shape),
            "k": matrix.k,
            "normalization": matrix.normalization,
            "noise": matrix.noise,
            "frobenius": float(np.linalg.norm(matrix.values)),
            "reciprocity": reciprocity_check(matrix),
        }
        path = self._output(args, "farfield_matrix.csv")
        if path:
            write_farfield_csv(path, matrix)
            write_json(self._output(args, "summary.json"), report)
            self._manifest(args, {"N": args.N, "grid": matrix.shape[0], "noise": args.noise,
                                  "engine": args.engine})
        return report


class ReciprocityCommand(Command):

    @property
    def name(self):
        return "reciprocity"

    @property
    def description(self):
        return "Reciprocity residual of a far-field matrix"

    def add_arguments(self, parser):
        parser.add_argument("--matrix", help="far-field matrix CSV (instead of --config)")
        _engine_flag(parser)

    def execute(self, args, settings):
        return {"residual": reciprocity_check(_matrix(self, args, DEFAULT_GRID, settings.threads))}


class DistinguishCommand(Command):

    @property
    def name(self):
        return "distinguish"

    @property
    def description(self):
        return "Relative far-field distance between --config and --other"

    def add_arguments(self, parser):
        parser.add_argument("--other", required=True, help="second scatterer config")
        _engine_flag(parser)

    def execute(self, args, settings):
        a = self._config(args)
        try:
            b = load_scatterer(args.other)
        except OSError as e:
            raise ValidationError([Violation("config", f"cannot read {args.other}: {e}")])
        distance = distinguishability(a, b, args.grid or DEFAULT_GRID, args.N, args.engine,
                                      threads=settings.threads)
        return {"distance": distance}


class LsmCommand(Command):

    @property
    def name(self):
        return "lsm"

    @property
    def description(self):
        return "Linear-sampling indicator and its level-set contour"

    def add_arguments(self, parser):
        parser.add_argument("--matrix", help="far-field matrix CSV (instead of --config)")
        parser.add_argument("--box", help="search box xmin,xmax,ymin,ymax")
        parser.add_argument("--points", type=int, default=SEARCH_POINTS, help="search points per side")
        _engine_flag(parser)

    def _box(self, args, config):
        if args.box:
            values = [float(v) for v in args.box.split(",")]
            if len(values) != 4:
                raise ValidationError([Violation("grid", "--box needs four comma-separated numbers")])
            return tuple(values)
        if config is None:
            raise ValidationError([Violation("grid", "--box is required with --matrix")])
        lo = config.outer.points.min(axis=0)
        hi = config.outer.points.max(axis=0)
        mid, half = 0.5 * (lo + hi), 0.5 * BOX_MARGIN * np.max(hi - lo)
        return (mid[0] - half, mid[0] + half, mid[1] - half, mid[1] + half)

    def execute(self, args, settings):
        config = None if args.matrix else self._config(args)
        matrix = _matrix(self, args, LSM_GRID, settings.threads)
        indicator = lsm_indicator(matrix, search_grid(self._box(args, config), args.points), args.alpha)
        contour = indicator_contour(indicator)
        report = {
            "alpha": indicator.alpha,
            "threshold": indicator.threshold,
            "max": float(np.max(indicator.values)),
            "contour_points": len(contour),
        }
        if config is not None:
            report["hausdorff"] = hausdorff_distance(contour, config.outer)
        path = self._output(args, "indicator.csv")
        if path:
            write_csv(path, indicator.rows())
            write_csv(self._output(args, "contour.csv"),
                      [{"x": float(p[0]), "y": float(p[1])} for p in contour], ["x", "y"])
            write_json(self._output(args, "summary.json"), report)
            self._manifest(args, {"grid": matrix.shape[0], "alpha": args.alpha, "noise": args.noise,
                                  "points": args.points})
        return report

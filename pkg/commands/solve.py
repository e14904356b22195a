"""
Forward Commands
================

forward        - solve one incidence; far field, residuals, fields at sample points
oracle-compare - BIE solution against the disk series (far field and near field)
energy-audit   - flux balance of a solution
"""

import json
import logging

import numpy as np

from commands.base import Command
from conducta.forward import (
    assemble_system,
    boundary_residuals,
    energy_audit,
    equispaced_angles,
    far_field,
    scattered_and_transmitted,
)
from conducta.oracle import radial_config_from, series_far_field, series_field_eval, series_solve
from conducta.runio import write_csv, write_json

log = logging.getLogger(__name__)

FARFIELD_SAMPLES = 64


def _solve(command, args, settings):
    config = command._config(args)
    incidence = command._incidence(args)
    system = assemble_system(config, args.N, command._resonance_threshold(args, settings))
    return config, incidence, system.solve(incidence)


def _relative_l2(values, reference):
    """‖values − reference‖₂ / ‖reference‖₂ (absolute when the reference vanishes)."""
    ref = float(np.linalg.norm(reference))
    diff = float(np.linalg.norm(values - reference))
    return diff / ref if ref > 0 else diff


def _pattern_rows(pattern):
    return [
        {"theta": float(a), "re_uinf": float(v.real), "im_uinf": float(v.imag)}
        for a, v in zip(pattern.angles, pattern.values)
    ]


class ForwardCommand(Command):

    @property
    def name(self):
        return "forward"

    @property
    def description(self):
        return "Solve the transmission problem for one incidence"

    def add_arguments(self, parser):
        parser.add_argument("--incidence", help='incidence JSON, e.g. \'{"type":"plane","direction":[1,0]}\'')
        parser.add_argument("--points", help="JSON list of [x, y] sample points")

    def execute(self, args, settings):
        config, incidence, solution = _solve(self, args, settings)
        pattern = far_field(solution, equispaced_angles(args.grid or FARFIELD_SAMPLES))
        report = {
            "incidence": incidence.to_dict(),
            "unknowns": solution.system.size,
            "condition": solution.condition,
            "residual": solution.residual,
            "boundary_residuals": boundary_residuals(solution),
            "far_field_max": float(np.max(np.abs(pattern.values))),
        }
        field_rows = []
        if args.points:
            sample = scattered_and_transmitted(solution, np.array(json.loads(args.points), dtype=float))
            field_rows = [
                {"x": float(p[0]), "y": float(p[1]), "region": str(r), "re": float(v.real), "im": float(v.imag)}
                for p, r, v in zip(sample.points, sample.region, sample.values)
            ]
            report["fields"] = field_rows
        path = self._output(args, "farfield.csv")
        if path:
            write_csv(path, _pattern_rows(pattern))
            if field_rows:
                write_csv(self._output(args, "fields.csv"), field_rows)
            write_json(self._output(args, "summary.json"), report)
            self._manifest(args, {"N": args.N, "grid": len(pattern.angles)})
        return report


class OracleCompareCommand(Command):

    @property
    def name(self):
        return "oracle-compare"

    @property
    def description(self):
        return "Compare the boundary-integral solution with the disk series"

    def add_arguments(self, parser):
        parser.add_argument("--incidence", help="incidence JSON")

    def execute(self, args, settings):
        config, incidence, solution = _solve(self, args, settings)
        table = series_solve(radial_config_from(config), incidence)
        angles = equispaced_angles(args.grid or FARFIELD_SAMPLES)
        bie = far_field(solution, angles).values
        series = series_far_field(table, angles).values

        R = table.radial.R
        Rb = table.radial.Rb or 0.0
        sample_radii = [0.5 * (R + Rb), 1.5 * R, 3.0 * R]
        phis = 2 * np.pi * np.arange(8) / 8
        samples = np.array([[r * np.cos(p), r * np.sin(p)] for r in sample_radii for p in phis])
        near_bie = scattered_and_transmitted(solution, samples).values
        near_series = series_field_eval(table, samples)

        residuals = boundary_residuals(solution)
        report = {
            "config": config.to_dict(),
            "incidence": incidence.to_dict(),
            "modes": int(table.M),
            "rel_l2_farfield": _relative_l2(bie, series),
            "rel_l2_nearfield": _relative_l2(near_bie, near_series),
            "max_boundary_residual": max(residuals.values()),
            "boundary_residuals": residuals,
            "condition": solution.condition,
        }
        log.info("oracle comparison: far %.2e, near %.2e", report["rel_l2_farfield"], report["rel_l2_nearfield"])
        path = self._output(args, "oracle_compare.json")
        if path:
            write_json(path, report)
            rows = [
                {"theta": float(a), "bie_re": float(b.real), "bie_im": float(b.imag),
                 "series_re": float(s.real), "series_im": float(s.imag)}
                for a, b, s in zip(angles, bie, series)
            ]
            write_csv(self._output(args, "farfield_compare.csv"), rows)
            self._manifest(args, {"N": args.N, "grid": len(angles)})
        return report


class EnergyAuditCommand(Command):

    @property
    def name(self):
        return "energy-audit"

    @property
    def description(self):
        return "Flux balance (transmission, dissipation, conductive loss) of a solution"

    def add_arguments(self, parser):
        parser.add_argument("--incidence", help="incidence JSON")

    def execute(self, args, settings):
        _, incidence, solution = _solve(self, args, settings)
        report = {"incidence": incidence.to_dict(), **energy_audit(solution)}
        path = self._output(args, "energy.json")
        if path:
            write_json(path, report)
            self._manifest(args, {"N": args.N})
        return report

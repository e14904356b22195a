"""Conductive transmission scattering: forward solver, series oracle, ITP analysis, inverse demos."""

__version__ = "0.1.0"

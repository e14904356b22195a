"""Shared fixtures: shipped configs and small scatterers built in code."""

import os

import pytest

from conducta.geometry import load_scatterer, scatterer_from_dict

CONFIG_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "configs")


def config_path(name):
    return os.path.join(CONFIG_DIR, name)


def disk_dict(R=1.0, N=64, k=2.0, lam=2.0, n=1.5, gamma=(0.5, -0.2), obstacle=None):
    """Concentric disk scatterer; obstacle is (R_b, condition dict) or None."""
    data = {
        "outer": {"kind": "circle", "params": {"R": R}, "N": N},
        "k": k,
        "lambda": lam,
        "n": n if not isinstance(n, complex) else [n.real, n.imag],
        "gamma": {"kind": "const", "value": list(gamma)},
    }
    if obstacle is not None:
        Rb, condition = obstacle
        data["obstacles"] = [{"kind": "circle", "params": {"R": Rb}, "N": N // 2}]
        data["obstacle_condition"] = [condition]
    return data


@pytest.fixture
def shipped():
    """Load a config from configs/ by file name."""
    return lambda name: load_scatterer(config_path(name))


@pytest.fixture
def disk():
    return scatterer_from_dict(disk_dict())


@pytest.fixture
def transparent():
    return scatterer_from_dict({
        "outer": {"kind": "ellipse", "params": {"a": 1.0, "b": 0.6}, "N": 64},
        "k": 2.0,
        "lambda": 1.0,
        "n": 1.0,
    })

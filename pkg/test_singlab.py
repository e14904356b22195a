import numpy as np
import pytest
from numpy.testing import assert_allclose

from conducta.errors import NumericalError, ValidationError
from conducta.geometry import make_curve, region_mesh, scatterer_from_dict
from conducta.singlab import (
    SingularityExperiment,
    default_delta,
    fit_gradient_constant,
    gamma_estimate,
    h1_discrete_norm,
    recover_lambda_at_boundary,
    run_dipole_experiment,
    run_point_source_experiment,
    source_sequence,
)
from conftest import disk_dict


def small_mesh(config, t0=0.0):
    return region_mesh(config, n_radial=10, n_angular=40, order=2, focus=t0, grading=2.0)


def fitted(c):
    c = np.asarray(c, dtype=complex)
    js = np.arange(1, len(c) + 1)
    return SingularityExperiment(
        config=None, kind="point", engine="oracle", t0=0.0, x0=np.array([1.0, 0.0]),
        normal=np.array([1.0, 0.0]), delta=0.1, js=js, sources=np.zeros((len(c), 2)), c=c,
    )


# --- Source sequences ---------------------------------------------------------

def test_sources_on_the_normal_ray():
    circle = make_curve("circle", {"R": 1.0}, 64)
    sources = source_sequence(circle, 0.0, 0.1, 4)
    assert_allclose(sources[:, 0], [1.1, 1.05, 1 + 0.1 / 3, 1.025])
    assert_allclose(sources[:, 1], 0.0, atol=1e-15)
    assert_allclose(np.hypot(*(sources - [1.0, 0.0]).T), 0.1 / np.arange(1, 5))


def test_default_delta(disk):
    assert_allclose(default_delta(disk), 0.1)


def test_delta_too_large_is_rejected(disk):
    with pytest.raises(ValidationError) as e:
        run_point_source_experiment(disk, delta=0.6, J=2, engine="oracle")
    assert e.value.violations[0].code == "containment"


def test_bad_delta_or_count():
    circle = make_curve("circle", {"R": 1.0}, 64)
    with pytest.raises(ValidationError):
        source_sequence(circle, 0.0, -0.1, 4)
    with pytest.raises(ValidationError):
        source_sequence(circle, 0.0, 0.1, 0)


# --- Fits and norms -----------------------------------------------------------

def test_gradient_constant_is_exact_for_scaled_kernel():
    g = np.array([[1.0, 2.0], [0.5, -1.0], [3.0, 0.0]])
    assert_allclose(fit_gradient_constant((0.7 - 0.1j) * g, g), 0.7 - 0.1j)


@pytest.mark.parametrize("c, expected", [(2 / 3, 2.0), (1.0, 1.0), (4 / 3, 0.5)])
def test_lambda_from_constant(c, expected):
    lam_hat, spread = recover_lambda_at_boundary(fitted([c]))
    assert_allclose(lam_hat, expected)
    assert spread == 0.0


def test_lambda_spread_from_last_two_fits():
    lam_hat, spread = recover_lambda_at_boundary(fitted([0.8, 2 / 3]))
    assert_allclose(lam_hat, 2.0)
    assert_allclose(spread, 0.5)


def test_inconsistent_fit_raises():
    with pytest.raises(NumericalError):
        recover_lambda_at_boundary(fitted([2.5]))


def test_gamma_needs_dipole_fit():
    with pytest.raises(ValidationError):
        gamma_estimate(fitted([1.0]))


def test_h1_norm_on_annulus():
    cfg = scatterer_from_dict(disk_dict(obstacle=(0.4, {"type": "dirichlet"})))
    mesh = region_mesh(cfg, n_radial=8)
    area = np.pi * (1 - 0.16)

    def one(pts):
        return np.ones(len(pts)), np.zeros((len(pts), 2))

    def x_coord(pts):
        grads = np.zeros((len(pts), 2))
        grads[:, 0] = 1.0
        return pts[:, 0], grads

    assert_allclose(h1_discrete_norm(one, mesh) ** 2, area, rtol=1e-10)
    assert_allclose(h1_discrete_norm(x_coord, mesh) ** 2, area + np.pi * (1 - 0.4 ** 4) / 4, rtol=1e-10)


# --- Point-source experiments -------------------------------------------------

def test_transparent_medium_gives_unit_constant():
    cfg = scatterer_from_dict(disk_dict(k=1.0, lam=1.0, n=1.0, gamma=(0.0, 0.0)))
    experiment = run_point_source_experiment(cfg, delta=0.05, J=4, engine="oracle", mesh=small_mesh(cfg))
    assert_allclose(experiment.c.real, 1.0, atol=1e-2)
    assert_allclose(experiment.c_fit.real, 1.0, atol=5e-3)


def test_boundary_solver_agrees_with_series():
    cfg = scatterer_from_dict(disk_dict())
    mesh = small_mesh(cfg)
    bie = run_point_source_experiment(cfg, delta=0.3, J=3, engine="bie", N=256, mesh=mesh)
    series = run_point_source_experiment(cfg, delta=0.3, J=3, engine="oracle", mesh=mesh)
    assert_allclose(bie.c, series.c, rtol=1e-4)
    assert_allclose(bie.vnorm, series.vnorm, rtol=1e-4)


def test_threads_do_not_change_results():
    cfg = scatterer_from_dict(disk_dict())
    mesh = small_mesh(cfg)
    one = run_point_source_experiment(cfg, delta=0.2, J=3, engine="oracle", mesh=mesh)
    many = run_point_source_experiment(cfg, delta=0.2, J=3, engine="oracle", mesh=mesh, threads=3)
    assert_allclose(one.c, many.c)


def test_report_rows_and_summary():
    cfg = scatterer_from_dict(disk_dict())
    experiment = run_point_source_experiment(cfg, delta=0.2, J=3, engine="oracle", mesh=small_mesh(cfg))
    rows = experiment.rows()
    assert [r["j"] for r in rows] == [1, 2, 3]
    assert set(rows[0]) == {"j", "c_fit_re", "c_fit_im", "remainder_h1", "vnorm_h1"}
    summary = experiment.summary()
    assert summary["c_expected"] == pytest.approx(2 / 3)
    assert summary["J"] == 3
    assert experiment.vnorm[-1] > experiment.vnorm[0]   # sources pile onto x0


def assert_bounded_after(values, start=8):
    tail = np.asarray(values)[start - 1:]
    median = np.median(tail)
    assert np.all(tail <= 2 * median) and np.all(tail >= median / 2), tail


@pytest.mark.slow
@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_point_sources_marched_to_the_boundary(lam):
    cfg = scatterer_from_dict(disk_dict(lam=lam))
    experiment = run_point_source_experiment(cfg, delta=0.1, J=64, engine="oracle", mesh=small_mesh(cfg))
    expected = 2.0 / (lam + 1.0)
    assert abs(experiment.c_fit.real - expected) <= 0.05 * expected
    assert np.all(np.diff(experiment.vnorm[7:]) > 0)
    assert_bounded_after(experiment.remainder)


# --- Dipole experiments -------------------------------------------------------

def test_dipole_needs_unit_lambda(disk):
    with pytest.raises(ValidationError) as e:
        run_dipole_experiment(disk, J=2, engine="oracle")
    assert e.value.violations[0].code == "coefficient sign"


def test_dipole_report():
    cfg = scatterer_from_dict(disk_dict(lam=1.0, gamma=(0.4, 0.0)))
    experiment = run_dipole_experiment(cfg, delta=0.2, J=4, engine="oracle", mesh=small_mesh(cfg))
    summary = experiment.summary()
    assert summary["gamma_expected"] == pytest.approx(0.4)
    assert summary["gamma_hat"] == pytest.approx(gamma_estimate(experiment))
    assert len(experiment.rows()) == 4
    assert experiment.incident_norm[-1] > experiment.incident_norm[0]


@pytest.mark.slow
def test_constant_gamma_recovered_by_dipoles():
    cfg = scatterer_from_dict(disk_dict(lam=1.0, gamma=(0.4, 0.0)))
    experiment = run_dipole_experiment(cfg, delta=0.1, J=64, engine="oracle", mesh=small_mesh(cfg))
    assert abs(gamma_estimate(experiment) - 0.4) <= 0.1 * 0.4


@pytest.mark.slow
def test_varying_gamma_recovered_at_x0():
    # γ(t) = 0.3 + 0.1 cos t is 0.4 at x0 = x(0)
    data = disk_dict(N=2048, lam=1.0)
    data["gamma"] = {"kind": "fourier", "value": [[0.3, 0.0], [0.1, 0.0]]}
    cfg = scatterer_from_dict(data)
    experiment = run_dipole_experiment(cfg, delta=0.4, J=64, engine="bie", mesh=small_mesh(cfg))
    assert experiment.summary()["gamma_expected"] == pytest.approx(0.4)
    assert abs(gamma_estimate(experiment) - 0.4) <= 0.1 * 0.4


@pytest.mark.slow
def test_unit_lambda_without_conductivity_leaves_bounded_remainder():
    cfg = scatterer_from_dict(disk_dict(lam=1.0, gamma=(0.0, 0.0)))
    experiment = run_dipole_experiment(cfg, delta=0.1, J=64, engine="oracle", mesh=small_mesh(cfg))
    assert np.all(np.diff(experiment.incident_norm) > 0)
    assert_bounded_after(experiment.remainder)
    assert abs(gamma_estimate(experiment)) <= 0.04


@pytest.mark.slow
def test_nonconstant_gamma_targets_local_value(shipped):
    cfg = shipped("star.json")
    experiment = run_dipole_experiment(cfg, delta=0.1, J=16, engine="bie", N=256, mesh=small_mesh(cfg))
    # γ(t) = 0.4 + 0.2 cos t gives 0.6 at x0, against a mean of 0.4
    assert abs(gamma_estimate(experiment) - 0.6) < abs(gamma_estimate(experiment) - 0.4)

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import special

from conducta import oracle
from conducta.errors import EvaluationError, NumericalError, ValidationError
from conducta.forward import equispaced_angles, incident_field
from conducta.geometry import ObstacleCondition, PointSource, plane_wave
from conducta.oracle import (
    RadialConfig,
    log_bessel,
    radial_config_from,
    required_modes,
    series_far_field,
    series_field_eval,
    series_solve,
    series_total_field,
    unitarity_defects,
)


def polar(r, theta):
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)


def test_log_bessel_matches_library():
    x = np.array([0.5, 3.0, 7.5])
    logs, dlog = log_bessel("J", 60, x)
    p = np.arange(61)[:, None]
    j = special.jv(p, x[None, :])
    ok = np.abs(j) > 1e-250
    assert_allclose(np.exp(logs[ok]), j[ok], rtol=1e-10)
    assert_allclose(dlog[ok], (special.jvp(p, x[None, :]) / j)[ok], rtol=1e-9)

    logs, dlog = log_bessel("H", 40, x)
    h = special.hankel1(p[:41], x[None, :])
    assert_allclose(np.exp(logs), h, rtol=1e-10)
    assert_allclose(dlog, special.h1vp(p[:41], x[None, :]) / h, rtol=1e-9)


def test_log_bessel_handles_orders_beyond_underflow():
    logs, _ = log_bessel("J", 400, np.array([2.0]))
    assert np.all(np.isfinite(logs))
    # ln J_p(x) ~ p ln(ex/2p) for p ≫ x
    assert logs[400, 0].real < -1500


def test_transparent_coefficients_vanish():
    table = series_solve(RadialConfig(R=1.0, k=2.0, lam=1.0, n=1.0), plane_wave(0.3))
    assert_allclose(table.A, 0.0, atol=1e-14)
    assert_allclose(series_far_field(table, equispaced_angles(16)).values, 0.0, atol=1e-13)


def test_transparent_total_field_is_incident():
    table = series_solve(RadialConfig(R=1.0, k=2.0, lam=1.0, n=1.0), plane_wave(0.3))
    pts = polar(np.array([0.2, 0.7, 1.3, 2.5]), np.array([0.0, 1.0, 2.0, 3.0]))
    assert_allclose(series_total_field(table, pts), incident_field(plane_wave(0.3), pts, 2.0)[0], atol=1e-10)


@pytest.mark.parametrize("k, n", [(2.0, 1.5), (50.0, 2.0)])
def test_lossless_unitarity(k, n):
    table = series_solve(RadialConfig(R=1.0, k=k, lam=1.0, n=n, gamma=0.3), plane_wave(0.0))
    assert np.max(unitarity_defects(table)) < 1e-8


def test_absorbing_medium_breaks_unitarity():
    table = series_solve(RadialConfig(R=1.0, k=2.0, lam=1.0, n=complex(1.5, 0.5)), plane_wave(0.0))
    assert np.max(unitarity_defects(table)) > 1e-3


@pytest.mark.parametrize("radial", [
    RadialConfig(R=1.0, k=2.0, lam=2.0, n=1.5, gamma=0.5 - 0.2j),
    RadialConfig(R=1.0, k=2.0, lam=0.5, n=3.0, gamma=0.0, Rb=0.4, condition=ObstacleCondition("neumann")),
])
def test_transmission_conditions_across_boundary(radial):
    table = series_solve(radial, plane_wave(0.5))
    theta = np.linspace(0, 2 * np.pi, 9, endpoint=False)
    eps = 1e-9
    out_v, out_g = series_total_field(table, polar(np.full(9, 1 + eps), theta), with_gradient=True)
    in_v, in_g = series_field_eval(table, polar(np.full(9, 1 - eps), theta), with_gradient=True)
    normal = polar(np.ones(9), theta)
    dn_out = np.sum(out_g * normal, axis=1)
    dn_in = np.sum(in_g * normal, axis=1)
    assert_allclose(out_v, in_v, atol=1e-7)
    assert_allclose(dn_out, radial.lam * dn_in + radial.gamma * in_v, atol=1e-6)


def test_helmholtz_stencil_residual():
    radial = RadialConfig(R=1.0, k=2.0, lam=2.0, n=1.5, gamma=0.5 - 0.2j)
    table = series_solve(radial, plane_wave(0.0))
    h = 1e-3
    stencil = np.array([[0, 0], [h, 0], [-h, 0], [0, h], [0, -h]])
    for centre, kk in (((1.6, 0.4), radial.k), ((0.3, -0.2), radial.k_int)):
        vals = series_field_eval(table, np.asarray(centre) + stencil)
        lap = (np.sum(vals[1:]) - 4 * vals[0]) / h ** 2
        assert abs(lap + kk ** 2 * vals[0]) < 1e-4 * max(1.0, abs(vals[0]))


def test_point_source_close_to_disk_converges():
    radial = RadialConfig(R=1.0, k=2.0, lam=2.0, n=1.5)
    source = PointSource((1.05, 0.0))
    M = required_modes(radial, source)
    assert M > 500
    table = series_solve(radial, source)
    assert table.tail_ratio() <= 1e-14


def test_grows_modes_until_tail_is_met(monkeypatch):
    monkeypatch.setattr(oracle, "required_modes", lambda radial, incidence: 5)
    table = series_solve(RadialConfig(R=1.0, k=2.0, lam=2.0, n=1.5), plane_wave(0.0))
    assert table.M > 5
    assert table.tail_ratio() <= oracle.SERIES_TAIL


def test_unmet_tail_is_numerical_error(monkeypatch):
    monkeypatch.setattr(oracle, "required_modes", lambda radial, incidence: 5)
    monkeypatch.setattr(oracle, "MODE_CAP", 8)
    with pytest.raises(NumericalError):
        series_solve(RadialConfig(R=1.0, k=2.0, lam=2.0, n=1.5), plane_wave(0.0))


def test_sound_soft_disk_inside_transparent_medium():
    # λ = n = 1, γ = 0: only the obstacle scatters
    k, Rb, theta_d = 2.0, 0.5, 0.7
    radial = RadialConfig(R=1.0, k=k, lam=1.0, n=1.0, Rb=Rb, condition=ObstacleCondition("dirichlet"))
    angles = equispaced_angles(24)
    values = series_far_field(series_solve(radial, plane_wave(theta_d)), angles).values

    m = np.arange(-30, 31)
    ratio = special.jv(np.abs(m), k * Rb) / special.hankel1(np.abs(m), k * Rb)
    classical = 4j * np.exp(1j * np.outer(angles - theta_d, m)) @ ratio
    assert_allclose(values, classical, rtol=1e-10, atol=1e-12)


def test_conductive_monopole_grows_with_gamma():
    gammas = np.linspace(0.0, 0.3, 7)
    a0 = []
    for gamma in gammas:
        table = series_solve(RadialConfig(R=1.0, k=2.0, lam=1.0, n=1.0, gamma=gamma), plane_wave(0.0))
        a0.append(abs(table.exterior_coefficients[table.M]))
    assert a0[0] < 1e-14
    assert np.all(np.diff(a0) > 0)


def test_too_few_modes_rejected():
    with pytest.raises(ValidationError) as e:
        series_solve(RadialConfig(R=1.0, k=10.0, lam=1.0, n=2.0), plane_wave(0.0), M=15)
    assert e.value.violations[0].code == "modes"


def test_radial_config_validation():
    with pytest.raises(ValidationError) as e:
        RadialConfig(R=1.0, k=1.0, lam=1.0, n=1.0, gamma=0.1j, Rb=1.2, condition=ObstacleCondition("dirichlet"))
    assert {v.code for v in e.value.violations} == {"containment", "conductive sign"}


def test_only_concentric_circles(shipped):
    with pytest.raises(ValidationError) as e:
        radial_config_from(shipped("kite.json"))
    assert e.value.violations[0].code == "oracle"
    radial = radial_config_from(shipped("disk_obstacle.json"))
    assert radial.Rb == 0.4 and radial.condition.type == "impedance"


def test_evaluation_on_boundary_or_inside_obstacle_raises():
    radial = RadialConfig(R=1.0, k=2.0, lam=1.0, n=2.0, Rb=0.5, condition=ObstacleCondition("dirichlet"))
    table = series_solve(radial, plane_wave(0.0))
    with pytest.raises(EvaluationError):
        series_field_eval(table, [[1.0, 0.0]])
    with pytest.raises(EvaluationError):
        series_field_eval(table, [[0.1, 0.1]])

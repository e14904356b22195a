import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conducta.errors import ValidationError
from conducta.itp import (
    C1_SAFETY,
    ITPParameters,
    c1_disk,
    c1_upper_bound,
    coercivity_lower_bound,
    coercivity_sign,
    condition1_radius,
    dirichlet_eig_disk,
    dirichlet_rayleigh_quotient,
    weighted_feasible_interval,
    max_wellposed_radius,
    check_wellposedness,
)

LAMBDA1 = 5.783185962946785


# --- λ-weighted lemma ---------------------------------------------------------

def test_lemma_feasible_interval():
    interval = weighted_feasible_interval(10.0, 0.5, 3.0)
    assert interval.feasible
    assert_allclose([interval.lower, interval.upper], [0.1875, 0.5])
    assert interval.retry is None


def test_lemma_contradiction():
    interval = weighted_feasible_interval(0.1, 1.0, 2.0)
    assert not interval.feasible
    assert interval.retry is None


def test_lemma_unit_ratio_is_always_empty():
    for b1, b2 in ((0.5, 0.5), (10.0, 3.0), (100.0, 0.01)):
        interval = weighted_feasible_interval(b1, b2, 1.0)
        assert not interval.feasible
        assert interval.retry is not None and not interval.retry.feasible


def test_lemma_swapped_retry():
    interval = weighted_feasible_interval(0.5, 10.0, 0.5)
    assert not interval.feasible
    assert interval.retry.swapped and interval.retry.feasible
    assert_allclose([interval.retry.lower, interval.retry.upper], [0.28125, 0.5])


def test_lemma_interval_matches_sampled_inequalities():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        b1, b2, rho = rng.uniform(0.05, 5.0, size=3)
        interval = weighted_feasible_interval(b1, b2, rho)
        q = ((1 + b2) / 2) ** 2
        eps = rng.uniform(0.0, 2.0)
        holds = eps * b1 > q and eps * rho > q and eps < min(b2, 1.0)
        inside = interval.lower < eps < interval.upper
        assert holds == inside


def test_lemma_rejects_non_positive_data():
    with pytest.raises(ValidationError):
        weighted_feasible_interval(-1.0, 0.5, 2.0)


# --- Disk constants -----------------------------------------------------------

def test_first_dirichlet_eigenvalue():
    assert_allclose(dirichlet_eig_disk(1.0), LAMBDA1, rtol=1e-15)
    assert_allclose(dirichlet_eig_disk(0.5), 4 * LAMBDA1, rtol=1e-15)
    assert_allclose(dirichlet_rayleigh_quotient(1.0), LAMBDA1, rtol=1e-12)


def test_c1_of_unit_disk():
    assert_allclose(c1_disk(1.0), 0.5, rtol=1e-10)


def test_c1_scales_linearly():
    assert_allclose(c1_disk(2.5), 2.5 * c1_disk(1.0), rtol=1e-8)
    assert_allclose(c1_upper_bound(0.3), C1_SAFETY * 0.3 * c1_disk(1.0))


def test_c1_truncation_guard():
    with pytest.raises(ValidationError) as e:
        c1_disk(1.0, modes=4)
    assert e.value.violations[0].code == "truncation"


# --- Sufficient conditions ----------------------------------------------------

def test_condition1_small_wavenumber():
    report = check_wellposedness(ITPParameters(k=1.0, n1=0.5, n2=1.0, eta=1.0, R=1.0))
    assert report.holding == [1]
    assert_allclose(report.margin(1), LAMBDA1 - 1.0, rtol=1e-14)
    assert report.conditions[3].applicable is False


def test_condition6_without_boundary_term():
    report = check_wellposedness(ITPParameters(k=1.0, n1=2.0, n2=1.0, eta=0.0, R=1.0))
    assert report.holding == [6]
    assert_allclose(report.margin(6), LAMBDA1 * 2 / 4 - 1.0, rtol=1e-14)


def test_condition3_margin():
    k, eta = 0.5, 5.0
    report = check_wellposedness(ITPParameters(k=k, n1=2.0, n2=1.0, eta=eta, R=1.0))
    c1 = C1_SAFETY * 0.5
    lhs = c1 * k ** 2 / (abs(eta) - c1 * k ** 2)
    rhs = LAMBDA1 / (k ** 2 * 4.0) - 0.5
    assert report.holding == [3]
    assert_allclose(report.margin(3), rhs - lhs, rtol=1e-8)


def test_condition4_fails_when_boundary_term_is_too_weak():
    report = check_wellposedness(ITPParameters(k=1.0, n1=1.0, n2=2.0, eta=-0.1, R=1.0))
    assert report.conditions[3].applicable
    assert report.margin(4) is None
    assert not report.well_posed


def test_large_disk_is_never_covered():
    for n1, n2, eta in ((0.5, 1.0, 1.0), (2.0, 1.0, -1.0), (2.0, 1.0, 3.0), (1.0, 2.0, 0.0)):
        assert not check_wellposedness(ITPParameters(k=1.0, n1=n1, n2=n2, eta=eta, R=100.0)).well_posed


def test_report_serializes():
    params = ITPParameters(k=1.0, n1=0.5, n2=1.0, eta=math.inf, R=1.0, b1=10.0, b2=0.5, ratio=3.0)
    data = json.loads(json.dumps(check_wellposedness(params).to_dict()))
    assert data["params"]["eta"] is None
    assert data["lemma"]["feasible"] is True
    assert data["constants"]["C1_safety"] == C1_SAFETY


@pytest.mark.parametrize("kwargs, code", [
    ({"k": 0.0, "n1": 0.5, "n2": 1.0}, "wavenumber"),
    ({"k": 1.0, "n1": 1.0, "n2": 1.0}, "contrast"),
    ({"k": 1.0, "n1": -1.0, "n2": 1.0}, "refractive sign"),
])
def test_parameter_validation(kwargs, code):
    with pytest.raises(ValidationError) as e:
        ITPParameters(eta=1.0, R=1.0, **kwargs)
    assert code in [v.code for v in e.value.violations]


def test_nan_eta_rejected():
    with pytest.raises(ValidationError):
        ITPParameters(k=1.0, n1=0.5, n2=1.0, eta=math.nan, R=1.0)


# --- Radius search ------------------------------------------------------------

def test_radius_matches_closed_form():
    assert_allclose(max_wellposed_radius(1.0, 0.5, 1.0, 1.0), condition1_radius(1.0, 1.0, 1.0), rtol=1e-12)
    assert_allclose(max_wellposed_radius(1.0, 0.5, 4.0, 1.0), condition1_radius(1.0, 4.0, 4.0), rtol=1e-12)


def test_doubling_k_halves_radius():
    for n1, n2, eta in ((0.5, 1.0, 1.0), (2.0, 1.0, 0.0), (1.0, 3.0, 0.0)):
        r1 = max_wellposed_radius(1.0, n1, n2, eta)
        r2 = max_wellposed_radius(2.0, n1, n2, eta)
        assert_allclose(r2, r1 / 2, rtol=1e-10)


def test_conditions_one_and_two_are_mirror_images():
    assert_allclose(
        max_wellposed_radius(1.3, 0.5, 1.0, 1.0),
        max_wellposed_radius(1.3, 1.0, 0.5, -1.0),
        rtol=1e-12,
    )


def test_radius_search_from_failing_start():
    assert_allclose(max_wellposed_radius(1.0, 0.5, 1.0, 1.0, r_start=50.0), 2.404825557695773, rtol=1e-12)


# --- Coercivity ---------------------------------------------------------------

def test_coercive_when_condition_holds():
    params = ITPParameters(k=1.0, n1=0.5, n2=1.0, eta=1.0, R=1.0)
    assert coercivity_sign(params) == 1.0
    assert coercivity_lower_bound(params) > 0


def test_coercive_with_reversed_contrast():
    params = ITPParameters(k=0.5, n1=2.0, n2=1.0, eta=0.0, R=1.0)
    assert coercivity_sign(params) == -1.0
    assert coercivity_lower_bound(params) > 0


def test_coercivity_lost_for_large_wavenumber():
    params = ITPParameters(k=10.0, n1=0.5, n2=1.0, eta=0.0, R=1.0)
    assert not check_wellposedness(params).well_posed
    assert coercivity_lower_bound(params) <= 0


def test_boundary_term_vanishes_as_eta_grows():
    big = coercivity_lower_bound(ITPParameters(k=1.0, n1=0.5, n2=1.0, eta=1e12, R=1.0))
    limit = coercivity_lower_bound(ITPParameters(k=1.0, n1=0.5, n2=1.0, eta=math.inf, R=1.0))
    assert_allclose(big, limit, rtol=1e-6)

import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from thermoform.engines import make_model
from thermoform.errors import NotConvergedWarning
from thermoform.maps import build_catalog_map
from thermoform.multifractal import bowen_dimension
from thermoform.potentials import TamePotential, const, geometric, log_deriv, re_z_clamped, select_tau
from thermoform.thermo import (
    asymptotic_variance,
    correlation,
    cohomology_defect,
    conformal_defect,
    conformal_measure,
    correlation_decay,
    entropy_and_lyapunov,
    fit_decay,
    gibbs_density,
    gibbs_expectation,
    periodic_orbit_pressure,
    pressure,
    pressure_fd,
    pressure_gradient,
    pressure_value,
    ratio_estimate,
)
from thermoform.transfer import operator_decay

PSI = re_z_clamped(2.0)
EXP_PHI = TamePotential(1.25, 0.95)
QUAD_PHI = TamePotential(1.3, 0.0)


@pytest.fixture(scope="module")
def exp_model(exp03):
    return make_model(exp03, EXP_PHI, "collocation")


# ---------------------------------------------------------------------------
# pressure
# ---------------------------------------------------------------------------

@given(st.floats(-5, 5), st.integers(3, 30))
def test_ratio_estimate_linear(p, n):
    value, _, ratios = ratio_estimate(p * np.arange(n + 1) + 0.7)
    assert value == pytest.approx(p, abs=1e-12)
    assert ratios.size == n


def test_ratio_estimate_geometric_approach():
    # ratios P + c r^k: Aitken removes the geometric transient
    k = np.arange(1, 25)
    lm = np.concatenate([[0.0], np.cumsum(-0.2 + 0.3 * 0.6 ** k)])
    value, extrapolated, _ = ratio_estimate(lm)
    assert extrapolated
    assert value == pytest.approx(-0.2, abs=1e-12)


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_power_pressure_closed_form(z2, t):
    est = pressure(z2, TamePotential(t, 0.0))
    assert est.value == pytest.approx((1 - t) * math.log(2), abs=1e-10)
    assert est.converged and est.spread < 1e-12


@pytest.mark.parametrize("t", [0.8, 1.5])
def test_cubic_pressure_closed_form(z3, t):
    assert pressure(z3, TamePotential(t, 0.0)).value == pytest.approx((1 - t) * math.log(3), abs=1e-10)


def test_pressure_base_invariance_exp(exp03):
    est = pressure(exp03, EXP_PHI)
    assert est.engine == "collocation"
    assert est.spread < 1e-10
    assert est.value == pytest.approx(est.eigenvalue_pressure, abs=1e-10)
    assert 0 < est.gap_ratio < 1


def test_pressure_warns_when_spread_exceeds_tol(quad):
    with pytest.warns(NotConvergedWarning):
        est = pressure(quad, QUAD_PHI, n=2, engine="tree", tol=1e-14)
    assert not est.converged


def test_periodic_orbit_pressure(z2, quad):
    assert periodic_orbit_pressure(z2, 1.5) == pytest.approx(-0.5 * math.log(2), abs=1e-5)
    tree = pressure_value(quad, QUAD_PHI, "tree")
    assert periodic_orbit_pressure(quad, 1.3, max_period=10) == pytest.approx(tree, abs=1e-5)


# ---------------------------------------------------------------------------
# Gibbs measure
# ---------------------------------------------------------------------------

def test_gibbs_power_symmetric(z2):
    phi = TamePotential(1.0, 0.0)
    assert gibbs_expectation(z2, phi, PSI) == pytest.approx(0.0, abs=1e-12)
    assert gibbs_expectation(z2, phi, log_deriv(0.0)) == pytest.approx(math.log(2), abs=1e-12)


def test_gibbs_expectation_dual_route(quad):
    tree = gibbs_expectation(quad, QUAD_PHI, PSI, engine="tree")
    coll = gibbs_expectation(quad, QUAD_PHI, PSI, engine="collocation")
    assert tree == pytest.approx(coll, abs=1e-6)


def test_entropy_and_lyapunov(z2, quad):
    d = entropy_and_lyapunov(z2, TamePotential(1.0, 0.0))
    assert d["h_mu"] == pytest.approx(math.log(2), abs=1e-12)
    assert d["chi_mu"] == pytest.approx(math.log(2), abs=1e-12)
    d = entropy_and_lyapunov(quad, QUAD_PHI, engine="collocation")
    # variational identity for phi = -t log|f'|
    assert d["h_mu"] == pytest.approx(d["pressure"] + 1.3 * d["chi_mu"], abs=1e-12)
    assert 0 < d["h_mu"] <= math.log(2) + 1e-12


def test_density_residual_halves(exp03, exp_model):
    r8 = gibbs_density(exp03, EXP_PHI, n=8, model=exp_model)
    r16 = gibbs_density(exp03, EXP_PHI, n=16, model=exp_model)
    assert r16.residual < r8.residual
    assert np.all(r16.values > 0) and not r16.flagged
    assert r16.decay_slope < 0


def test_conformal_defect(quad):
    tests = [lambda z: np.exp(-np.abs(z) ** 2), lambda z: np.cos(np.real(z))]
    assert conformal_defect(quad, QUAD_PHI, tests, engine="collocation") < 1e-12
    assert conformal_defect(quad, QUAD_PHI, tests, engine="tree", depth=10) < 1e-3


# ---------------------------------------------------------------------------
# conformal measure atoms
# ---------------------------------------------------------------------------

def test_conformal_atoms_power(z2):
    cm = conformal_measure(z2, TamePotential(1.0, 0.0), 0.0, N=3)
    assert cm.total == pytest.approx(1.0)
    # level k carries 1/3 of the mass spread over 2^k atoms
    for k in (1, 2, 3):
        np.testing.assert_allclose(cm.masses[cm.levels == k], 1 / 3 / 2 ** k, rtol=1e-12)




# ---------------------------------------------------------------------------
# derivatives of the pressure
# ---------------------------------------------------------------------------

def test_gradient_matches_fd(exp03, exp_model):
    grad = pressure_gradient(exp03, EXP_PHI, PSI, model=exp_model)
    fd = pressure_fd(exp03, EXP_PHI, PSI)
    assert grad == pytest.approx(fd, abs=max(1e-3, 0.01 * abs(fd)))


def test_gradient_of_metric_term(quad):
    # d/dt P(-t log|f'|) = -chi
    grad = -pressure_gradient(quad, QUAD_PHI, log_deriv(0.0), engine="collocation")
    fd = (pressure_value(quad, TamePotential(1.301, 0.0)) - pressure_value(quad, TamePotential(1.299, 0.0))) / 0.002
    assert grad == pytest.approx(fd, rel=1e-5)


def test_variance_matches_second_difference(exp03, exp_model):
    var = asymptotic_variance(exp03, EXP_PHI, PSI, model=exp_model)
    fd2 = pressure_fd(exp03, EXP_PHI, PSI, order=2)
    assert var.reliable
    assert var.value > 0
    assert var.value == pytest.approx(fd2, rel=0.1)


def test_variance_of_cross_pair_is_symmetric(quad):
    model = make_model(quad, QUAD_PHI, "collocation")
    a = asymptotic_variance(quad, QUAD_PHI, PSI, log_deriv(0.0), model=model).value
    b = asymptotic_variance(quad, QUAD_PHI, log_deriv(0.0), PSI, model=model).value
    assert a == pytest.approx(b, rel=1e-9)


@given(st.floats(0.2, 3.0))
def test_variance_nonnegative(bound):
    m = build_catalog_map("quadratic", [0.1])
    var = asymptotic_variance(m, QUAD_PHI, re_z_clamped(bound), K=30, engine="collocation")
    assert var.value >= -1e-12


def test_variance_requires_lags(quad):
    with pytest.raises(ValueError):
        asymptotic_variance(quad, QUAD_PHI, PSI, K=0)


# ---------------------------------------------------------------------------
# correlations
# ---------------------------------------------------------------------------

def test_fit_decay_geometric():
    assert fit_decay(3.0 * 0.5 ** np.arange(20)) == pytest.approx(0.5, rel=1e-12)
    assert fit_decay(np.zeros(10)) == 0.0


def test_correlation_rate_matches_operator_decay(exp03, exp_model):
    C, xi = correlation_decay(exp03, EXP_PHI, PSI, PSI, 20, model=exp_model)
    rep = operator_decay(exp03, EXP_PHI, lambda z: 2 * np.tanh(np.real(z) / 2), model=exp_model)
    assert 0 < xi < 1
    assert xi == pytest.approx(rep.xi, rel=0.25)
    assert xi == pytest.approx(exp_model.gap_ratio, rel=0.25)


# ---------------------------------------------------------------------------
# cohomology
# ---------------------------------------------------------------------------

def test_cohomology_of_shift(quad):
    rep = cohomology_defect(quad, QUAD_PHI, QUAD_PHI.shifted(0.4))
    assert rep.defect <= 1e-8
    assert rep.R_hat == pytest.approx(-0.4, abs=1e-8)
    assert rep.n_points >= 10


def test_cohomology_of_tau_change(exp03):
    # changing tau adds a coboundary: periodic averages agree exactly
    rep = cohomology_defect(exp03, EXP_PHI, EXP_PHI.with_tau(0.85))
    assert np.max(np.abs(rep.per_point)) < 1e-10
    assert rep.defect < 1e-6


def test_cohomology_detects_distinct(quad):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotConvergedWarning)
        rep = cohomology_defect(quad, QUAD_PHI, TamePotential(1.6, 0.0))
    assert rep.defect > 1e-7
    assert np.sum(np.abs(rep.per_point - rep.R_hat) > 1e-7) >= 10


# ---------------------------------------------------------------------------
# constant and geometric directions
# ---------------------------------------------------------------------------

def test_constant_directions(exp03, exp_model):
    assert gibbs_expectation(exp03, EXP_PHI, const(0.7), model=exp_model) == pytest.approx(0.7, abs=1e-12)
    assert pressure_gradient(exp03, EXP_PHI, const(1.0), model=exp_model) == pytest.approx(1.0, abs=1e-12)
    assert abs(asymptotic_variance(exp03, EXP_PHI, const(0.7), model=exp_model).value) < 1e-9
    assert abs(correlation(exp03, EXP_PHI, PSI, const(0.7), 3, model=exp_model)) < 1e-12


def test_power_one_step_mixing(z2):
    def re(z):
        return np.real(z)

    assert abs(correlation(z2, TamePotential(1.0, 0.0), re, re, 1)) < 1e-14


def test_geometric_direction_exp(exp03, exp_model):
    psi = geometric(-1.0, EXP_PHI.tau)
    grad = pressure_gradient(exp03, EXP_PHI, psi, model=exp_model)
    assert grad == pytest.approx(pressure_fd(exp03, EXP_PHI, psi), rel=1e-3)
    var = asymptotic_variance(exp03, EXP_PHI, psi, model=exp_model)
    assert var.value > 0
    assert var.value == pytest.approx(pressure_fd(exp03, EXP_PHI, psi, order=2), rel=0.1)


def test_lyapunov_matches_pressure_slope(quad):
    h = bowen_dimension(quad).h
    chi = gibbs_expectation(quad, TamePotential(h, 0.0), log_deriv(0.0))
    slope = (pressure_value(quad, TamePotential(h - 1e-3, 0.0)) - pressure_value(quad, TamePotential(h + 1e-3, 0.0))) / 2e-3
    assert chi == pytest.approx(slope, abs=1e-3)


def test_cohomology_power_geometric(z2):
    rep = cohomology_defect(z2, TamePotential(1.0, 0.0), TamePotential(2.0, 0.0))
    assert rep.defect <= 1e-8
    assert rep.R_hat == pytest.approx(math.log(2), abs=1e-12)


def test_cohomology_exp_nonconstant_h(exp03):
    phi = TamePotential(1.3, select_tau(exp03, 1.3))
    rep = cohomology_defect(exp03, phi, phi.plus_observable(1.0, PSI))
    assert rep.n_points >= 10
    assert rep.defect > 1e-2


def test_conformal_tightness_above_pressure(exp03):
    cm = conformal_measure(exp03, EXP_PHI, pressure_value(exp03, EXP_PHI) + 0.05, N=3)
    assert cm.expected_exponent == pytest.approx(0.09375)
    assert cm.decay_exponent >= 0.7 * cm.expected_exponent


def test_conformal_atoms_power_positive_s(z2):
    cm = conformal_measure(z2, TamePotential(1.0, 0.0), 0.1, N=4, radii=[1.5, 3.0])
    for k in range(1, 5):
        lvl = cm.masses[cm.levels == k]
        np.testing.assert_allclose(lvl, lvl[0], rtol=1e-12)
    assert np.all(cm.mass_outside == 0)


def test_density_power_is_one(z2):
    prof = gibbs_density(z2, TamePotential(1.0, 0.0), grid=np.exp(1j * np.linspace(0, 6, 5)), n=8)
    np.testing.assert_allclose(prof.values, 1.0, atol=1e-12)
    assert prof.residual < 1e-12


def test_density_single_step_is_normalised_operator(quad):
    model = make_model(quad, QUAD_PHI, "collocation")
    grid = np.array([1.1 + 0.0j, -0.2 + 1.0j])
    prof = gibbs_density(quad, QUAD_PHI, grid=grid, n=1, model=model)
    np.testing.assert_allclose(prof.values, model.iterate_normalised(lambda z: np.ones(np.shape(z)), grid, 1),
                               rtol=1e-10)

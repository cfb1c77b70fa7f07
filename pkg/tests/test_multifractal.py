import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from thermoform.errors import BracketError, DomainError
from thermoform.maps import build_catalog_map
from thermoform.potentials import TamePotential, const, re_z_clamped, select_tau, zero
from thermoform.thermo import pressure_value
from thermoform.multifractal import (
    bowen_dimension,
    dimension_of_measure,
    legendre_check,
    measure_potential,
    normalize_potential,
    parameter_sweep,
    periodic_orbit_dimension,
    quadratic_coefficient,
    smoothness_residual,
    solve_pressure_zero,
    spectrum,
    temperature,
    temperature_curve,
)


@pytest.fixture(scope="module")
def exp_curve():
    m = build_catalog_map("exp", [0.3])
    phi = TamePotential(1.3, select_tau(m, 1.3, 0.9))
    return m, phi, temperature_curve(m, phi, np.linspace(-0.5, 1.5, 9))


# ---------------------------------------------------------------------------
# Bowen dimension
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("fixture", ["z2", "z3"])
def test_bowen_power_maps(fixture, request):
    m = request.getfixturevalue(fixture)
    res = bowen_dimension(m)
    assert res.h == pytest.approx(1.0, abs=1e-6)
    assert abs(res.residual) < 1e-10


def test_bowen_quadratic_dual_route(quad):
    res = bowen_dimension(quad)
    assert res.h == pytest.approx(1.00361, abs=1e-3)
    assert res.h == pytest.approx(periodic_orbit_dimension(quad), abs=1e-6)
    assert res.h == pytest.approx(bowen_dimension(quad, engine="tree").h, abs=1e-8)


def test_bowen_exp_above_growth_order(exp03):
    res = bowen_dimension(exp03)
    assert 1.0 < res.h < 2.0
    assert abs(pressure_value(exp03, TamePotential(res.h, res.tau))) < 1e-10


def test_bowen_bracket_without_sign_change(z2):
    with pytest.raises(BracketError):
        bowen_dimension(z2, bracket=(1.5, 2.5))


# ---------------------------------------------------------------------------
# temperature and spectrum
# ---------------------------------------------------------------------------

def test_normalize_potential(exp03, z2):
    phi = normalize_potential(exp03, TamePotential(1.25, 0.95))
    assert abs(pressure_value(exp03, phi)) < 1e-12
    phi = normalize_potential(z2, TamePotential(2.0, 0.0))
    assert phi.h.constant_value() == pytest.approx(math.log(2), abs=1e-12)
    assert normalize_potential(z2, TamePotential(1.0, 0.0)).h.constant_value() == pytest.approx(0.0, abs=1e-12)
    raw = TamePotential(1.25, 0.95, const(0.3))
    phi = normalize_potential(exp03, raw)
    assert phi.h.constant_value() == pytest.approx(0.3 - pressure_value(exp03, raw), abs=1e-12)


@given(st.floats(0.1, 3.0), st.floats(-3.0, 3.0))
def test_solve_pressure_zero_linear(a, b):
    s, _ = solve_pressure_zero(lambda s: (b - a * s, -a, None), 0.0)
    assert s == pytest.approx(b / a, abs=1e-10)


def test_temperature_power_linear(z2):
    curve = temperature_curve(z2, TamePotential(1.0, 0.0), np.linspace(-1, 1, 9))
    np.testing.assert_allclose(curve.T, 1 - curve.q, atol=1e-10)
    np.testing.assert_allclose(curve.T1_fd, -1.0, atol=1e-7)
    np.testing.assert_allclose(curve.T1_analytic, -1.0, atol=1e-12)
    np.testing.assert_allclose(curve.T2, 0.0, atol=1e-6)
    sp = spectrum(curve)
    assert sp.degenerate and "degenerate spectrum" in sp.notes
    assert sp.alpha[0] == pytest.approx(1.0) and sp.F[0] == pytest.approx(1.0)


def test_temperature_single_point(exp03):
    phi = normalize_potential(exp03, TamePotential(1.25, 0.95))
    assert temperature(exp03, phi, 1.0) == pytest.approx(0.0, abs=1e-10)


def test_temperature_exp_curve(exp_curve):
    m, phi, curve = exp_curve
    checks = curve.checks()
    assert checks["decreasing"] and checks["convex"] and checks["T1_negative"]
    assert checks["T1_routes"] <= 1
    # variance route agrees with the second differences
    assert np.max(curve.variance_mismatch()) < 0.05
    i1 = int(np.argmin(np.abs(curve.q - 1)))
    assert curve.T[i1] == pytest.approx(0.0, abs=1e-10)


def test_spectrum_exp(exp_curve):
    m, phi, curve = exp_curve
    sp = spectrum(curve)
    assert not sp.degenerate
    assert sp.legendre_ok and sp.concave
    # F at q = 0 is the Bowen dimension
    i0 = int(np.argmin(np.abs(curve.q)))
    assert sp.F[i0] == pytest.approx(bowen_dimension(m).h, abs=1e-4)
    assert int(np.argmax(sp.F)) == i0


def test_measure_dimension_at_q1(exp_curve):
    m, phi, curve = exp_curve
    i1 = int(np.argmin(np.abs(curve.q - 1)))
    mu_phi = measure_potential(m, phi.shifted(curve.normalization), 1.0, curve.T[i1])
    assert dimension_of_measure(m, mu_phi) == pytest.approx(curve.F[i1], abs=1e-4)


def test_measure_of_maximal_dimension(quad):
    h = bowen_dimension(quad).h
    assert dimension_of_measure(quad, TamePotential(h, 0.0)) == pytest.approx(h, abs=1e-9)


def test_degenerate_geometric_potential(quad):
    h = bowen_dimension(quad).h
    curve = temperature_curve(quad, TamePotential(h, 0.0), np.linspace(-1, 1, 7))
    sp = spectrum(curve)
    assert sp.degenerate
    assert sp.F[0] == pytest.approx(h, abs=1e-6)


def test_spectrum_refuses_concave_T(z2):
    curve = temperature_curve(z2, TamePotential(1.0, 0.0), np.linspace(-1, 1, 7))
    curve.T2 = curve.T2 - 1.0
    with pytest.raises(DomainError):
        spectrum(curve)


def test_legendre_check_synthetic():
    q = np.linspace(-2, 2, 21)
    T = np.log(np.cosh(q)) - q
    alpha = -(np.tanh(q) - 1)
    assert legendre_check(q, T, alpha)
    assert not legendre_check(q, T, alpha[::-1])


def test_quadratic_potential_with_observable(quad):
    phi = TamePotential(1.0, 0.0, re_z_clamped(2.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        curve = temperature_curve(quad, phi, np.linspace(-1, 1, 7))
    sp = spectrum(curve)
    assert not sp.degenerate
    assert sp.legendre_ok


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def test_quadratic_coefficient_synthetic():
    c = np.linspace(0, 0.2, 11)
    d = 1 + 0.36 * c ** 2 + 0.8 * c ** 3 - 2.0 * c ** 4
    assert quadratic_coefficient(c, d) == pytest.approx(0.36, rel=1e-8)


def test_smoothness_residual():
    x = np.linspace(0, 1, 15)
    assert smoothness_residual(x, np.sin(x)) < 1e-5
    y = np.sin(x)
    y[7] += 0.1
    assert smoothness_residual(x, y) > 1e-2
    assert smoothness_residual(x[:5], y[:5]) == 0.0


def test_single_point_sweep():
    table = parameter_sweep("quadratic", [0.1])
    assert table.params == [0.1]
    assert table.values[0] == pytest.approx(bowen_dimension(build_catalog_map("quadratic", [0.1])).h)
    assert table.flagged == [] and table.smoothness == 0.0


def test_sweep_flags_non_hyperbolic():
    table = parameter_sweep("quadratic", [0.0, 0.3])
    assert table.params == [0.0]
    assert table.flagged and table.flagged[0]["params"] == [0.3]


@pytest.mark.slow
def test_exp_parameter_sweep():
    lams = np.round(np.arange(0.10, 0.35 + 1e-9, 0.025), 12)
    table = parameter_sweep("exp", lams)
    assert len(table.values) == lams.size and not table.flagged
    assert all(1 < v < 2 for v in table.values)
    assert table.smoothness <= 1e-3


@pytest.mark.parametrize("family,params,t,h,degenerate", [
    ("exp", [0.3], 2.0, re_z_clamped(2.0), False),
    ("quadratic", [0.1], 2.0, None, False),
    ("exp", [0.3], "bowen", None, True),
    ("quadratic", [0.1], "bowen", None, True),
])
def test_degeneracy_matches_geometric_input(family, params, t, h, degenerate):
    m = build_catalog_map(family, params)
    if t == "bowen":
        res = bowen_dimension(m)
        phi = TamePotential(res.h, res.tau)
    else:
        tau = 0.0 if m.finite_degree else select_tau(m, t, 0.9)
        phi = TamePotential(t, tau, h if h is not None else zero())
    curve = temperature_curve(m, phi, np.linspace(-1, 1, 7))
    assert spectrum(curve).degenerate is degenerate
    if not degenerate:
        assert curve.T2.min() > 0

import math

import numpy as np
import pytest

from conftest import ones
from thermoform.collocation import AnnulusChart, ExpChart, default_chart, supports_collocation
from thermoform.engines import make_model, resolve_engine
from thermoform.errors import DomainError
from thermoform.maps import build_catalog_map
from thermoform.potentials import TamePotential
from thermoform.thermo import julia_grid


def test_chart_selection(z2, quad, exp03):
    assert isinstance(default_chart(exp03), ExpChart)
    assert isinstance(default_chart(quad), AnnulusChart)
    assert resolve_engine(z2) == "tree"
    assert resolve_engine(exp03) == "collocation"
    assert resolve_engine(quad) == "collocation"
    tangent = build_catalog_map("tangent", [0.5])
    assert not supports_collocation(tangent)
    assert resolve_engine(tangent) == "tree"
    with pytest.raises(DomainError):
        resolve_engine(tangent, "collocation")


@pytest.mark.parametrize("t", [0.5, 1.0, 1.7])
def test_power_closed_form(z2, t):
    model = make_model(z2, TamePotential(t, 0.0), "collocation")
    assert model.pressure == pytest.approx((1 - t) * math.log(2), abs=1e-8)


def test_exp_pressure_independent_of_tau(exp03):
    # changing tau adds a coboundary: same operator spectrum, different matrix
    vals = [make_model(exp03, TamePotential(1.25, tau), "collocation").pressure for tau in (0.85, 0.9, 0.95, 0.98)]
    assert max(vals) - min(vals) < 5e-6


def test_quadratic_engines_agree(quad):
    phi = TamePotential(1.3, 0.0)
    tree = make_model(quad, phi, "tree").pressure
    coll = make_model(quad, phi, "collocation").pressure
    assert coll == pytest.approx(tree, abs=1e-7)


@pytest.mark.parametrize("family,params,phi", [
    ("exp", [0.3], TamePotential(1.25, 0.85)),
    ("quadratic", [0.1], TamePotential(1.3, 0.0)),
])
def test_leading_eigen_triple(family, params, phi):
    m = build_catalog_map(family, params)
    model = make_model(m, phi, "collocation")
    assert model.positive
    assert 0 < model.gap_ratio < 0.9
    assert model.conformal_integral(ones) == pytest.approx(1.0, abs=1e-12)
    rho = model.density(julia_grid(m, 8))
    assert np.all(rho.real > 0)


def test_log_iterates_grow_at_eigenvalue(exp03):
    model = make_model(exp03, TamePotential(1.25, 0.95), "collocation")
    lm = model.log_iterates(1.0 + 0.5j, 30)
    assert lm[0] == 0.0
    assert np.diff(lm)[-1] == pytest.approx(model.pressure, abs=1e-10)


def test_normalised_iterate_converges(quad):
    model = make_model(quad, TamePotential(1.3, 0.0), "collocation")
    grid = julia_grid(quad, 6)
    target = model.density(grid)
    err = [np.max(np.abs(model.iterate_normalised(ones, grid, n) - target)) for n in (2, 6, 12)]
    assert err[0] > err[1] > err[2]
    # contraction at the spectral gap, with some slack
    assert err[2] / err[1] < (model.gap_ratio + 0.1) ** 6

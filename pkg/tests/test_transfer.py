import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import ones
from thermoform.errors import DivergentSumError
from thermoform.maps import BranchWindow, build_catalog_map
from thermoform.potentials import TamePotential
from thermoform.transfer import (
    GibbsTreeMeasure,
    apply_transfer,
    borel_sum,
    expand_tree,
    lattice_tail_bound,
    lattice_tail_estimate,
    operator_decay,
)

angles = st.floats(0, 2 * math.pi)


# ---------------------------------------------------------------------------
# preimage trees
# ---------------------------------------------------------------------------

def test_tree_power_depth_three(z2):
    tree = expand_tree(z2, TamePotential(1.0, 0.0), 1.0, 3)
    assert tree.leaves.points.size == 8
    np.testing.assert_allclose(np.exp(tree.leaves.log_weight), 2.0 ** -3, rtol=1e-13)
    np.testing.assert_allclose(tree.leaves.points ** 8, 1.0, atol=1e-12)


def test_tree_exp_single_level(exp1):
    phi = TamePotential(2.0, 0.95)
    tree = expand_tree(exp1, phi, math.e, 1, BranchWindow(max_count=41))
    z = tree.leaves.points
    assert z.size == 41
    k = np.round(z.imag / (2 * math.pi))
    np.testing.assert_allclose(z, 1 + 2j * math.pi * k, atol=1e-12)
    assert sorted(k) == list(range(-20, 21))
    # weight = |w|^(-t(1-tau)) |z|^(-t tau) for the exponential
    b = borel_sum(exp1, 2 * 0.95, math.e, BranchWindow(max_count=41))
    assert tree.sum(ones) == pytest.approx(math.e ** (-2 * 0.05) * b.value, rel=1e-12)


def test_tree_depth_zero_is_root(z2):
    tree = expand_tree(z2, TamePotential(1.0, 0.0), 0.3 + 0.1j, 0)
    assert tree.n_nodes() == 1
    assert tree.leaves.points[0] == 0.3 + 0.1j
    assert tree.log_mass() == 0.0


@given(angles, st.integers(1, 4))
def test_tree_round_trip_power(theta, n):
    m = build_catalog_map("power", [3])
    tree = expand_tree(m, TamePotential(1.0, 0.0), np.exp(1j * theta), n)
    for k in range(1, n + 1):
        lvl, up = tree.levels[k], tree.levels[k - 1]
        np.testing.assert_allclose(m.eval(lvl.points), up.points[lvl.parent], atol=1e-11)
        assert lvl.points.size <= 3 ** k
        assert np.all(np.isfinite(lvl.log_weight))


def test_tree_round_trip_exp(exp03):
    phi = TamePotential(1.25, 0.95)
    tree = expand_tree(exp03, phi, 1.0 + 0.5j, 2, BranchWindow(max_count=9))
    for k in (1, 2):
        lvl, up = tree.levels[k], tree.levels[k - 1]
        assert lvl.points.size <= 9 ** k
        np.testing.assert_allclose(exp03.eval(lvl.points), up.points[lvl.parent], rtol=1e-11)
    assert np.all(tree.tail_bound[1:] > 0)


def test_tree_csv(z2):
    tree = expand_tree(z2, TamePotential(1.0, 0.0), 1.0, 2)
    rows = list(csv.reader(io.StringIO(tree.to_csv())))
    assert rows[0] == ["level", "index", "parent", "re", "im", "log_weight"]
    assert len(rows) == 1 + tree.n_nodes()
    assert float(rows[-1][5]) == pytest.approx(-2 * math.log(2))


def test_gibbs_tree_measure(quad):
    beta = 0.5 + math.sqrt(0.25 - 0.1)  # repelling fixed point
    tree = expand_tree(quad, TamePotential(1.3, 0.0), beta, 6)
    mu = GibbsTreeMeasure(tree)
    assert mu.weights.sum() == pytest.approx(1.0, abs=1e-13)
    assert np.all(mu.weights > 0)
    np.testing.assert_allclose(mu.orbit_points(2), quad.iterate(mu.points, 2), atol=1e-9)


# ---------------------------------------------------------------------------
# one application of the operator
# ---------------------------------------------------------------------------

def test_transfer_power_constant(z2):
    r = apply_transfer(z2, TamePotential(2.0, 0.0), ones, 1.0)
    assert r.value == pytest.approx(0.5, rel=1e-14)
    assert r.tail_bound == 0.0


def test_transfer_power_odd_observable(z2):
    r = apply_transfer(z2, TamePotential(2.0, 0.0), lambda z: z.real, 1.0)
    assert abs(r.value) < 1e-15


def test_transfer_exp_stabilises(exp1):
    phi = TamePotential(2.0, 0.95)
    a = apply_transfer(exp1, phi, ones, math.e, BranchWindow(max_count=1001))
    b = apply_transfer(exp1, phi, ones, math.e, BranchWindow(max_count=2001))
    assert abs(a.corrected - b.corrected) < 1e-8
    # the raw sums move by more than the bound allows only if the bound is wrong
    assert b.value - a.value <= a.tail_bound
    assert b.value >= a.value


@given(angles, angles)
def test_pull_out_identity(theta, phase):
    m = build_catalog_map("power", [2])
    phi = TamePotential(1.4, 0.0)
    w = np.exp(1j * theta)

    def g(z):
        return np.cos(np.angle(z) + phase) + 2.0

    def u(z):
        return np.sin(3 * np.angle(z)) + 1.5

    lhs = apply_transfer(m, phi, lambda z: g(z) * u(m.eval(z)), w).value
    rhs = u(np.array([w]))[0] * apply_transfer(m, phi, g, w).value
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_pull_out_identity_exp(exp03):
    phi = TamePotential(1.25, 0.95)
    w = 1.0 + 0.5j
    win = BranchWindow(max_count=41)

    def g(z):
        return 1.0 / (1.0 + np.abs(z) ** 2)

    def u(z):
        return np.tanh(np.real(z))

    lhs = apply_transfer(exp03, phi, lambda z: g(z) * u(exp03.eval(z)), w, win).value
    rhs = float(u(w)) * apply_transfer(exp03, phi, g, w, win).value
    assert lhs == pytest.approx(rhs, rel=1e-10)


@given(angles)
def test_composition_matches_tree(theta):
    m = build_catalog_map("quadratic", [0.1])
    phi = TamePotential(1.2, 0.0)
    w = 1.2 * np.exp(1j * theta)

    def g(z):
        return np.exp(-np.abs(z - 0.3))

    def Lg(z):
        return np.array([apply_transfer(m, phi, g, zz).value for zz in np.atleast_1d(z)])

    two = apply_transfer(m, phi, Lg, w).value
    tree = expand_tree(m, phi, w, 2)
    assert two == pytest.approx(tree.sum(g), rel=1e-12)


@pytest.mark.parametrize("counts", [(5, 21, 101, 401)])
def test_truncation_monotone(exp03, counts):
    phi = TamePotential(1.25, 0.95)
    rs = [apply_transfer(exp03, phi, ones, 0.8 + 0.3j, BranchWindow(max_count=c)) for c in counts]
    vals = [r.value for r in rs]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    for a, b in zip(rs, rs[1:]):
        assert a.value + a.tail_bound >= b.value


def test_vanishing_at_infinity_slope(exp1):
    t, tau = 2.0, 0.75
    phi = TamePotential(t, tau)
    x = np.array([1e4, 1e5, 1e6, 1e7, 1e8])
    vals = [apply_transfer(exp1, phi, ones, w, BranchWindow(max_count=401)).corrected for w in x]
    slope = np.polyfit(np.log(x), np.log(vals), 1)[0]
    expected = -t * (1.0 - tau)
    assert abs(slope - expected) <= 0.2 * abs(expected)


# ---------------------------------------------------------------------------
# Borel sums
# ---------------------------------------------------------------------------

def test_borel_exp_closed_form(exp1):
    exact = 0.5 / math.tanh(0.5)
    b = borel_sum(exp1, 2.0, math.e)
    assert abs(b.corrected - exact) < 1e-6
    assert abs(b.value - exact) <= b.tail_bound
    assert b.n_terms == 2001


def test_borel_power(z2):
    b = borel_sum(z2, 3.0, 4.0)
    assert b.value == pytest.approx(0.25, rel=1e-14)
    assert b.tail_bound == 0.0


def test_borel_divergent(exp1):
    with pytest.raises(DivergentSumError):
        borel_sum(exp1, 0.9, math.e)


def test_lattice_tail_estimate_within_bound(exp1):
    for s in (1.3, 2.0, 3.5):
        est = lattice_tail_estimate(exp1, math.e, s, 10, -10)
        bound = lattice_tail_bound(exp1, math.e, s, 10, -10)
        ks = np.r_[np.arange(11, 200001), -np.arange(11, 200001)]
        direct = np.sum(np.abs(1 + 2j * math.pi * ks) ** -s)
        direct += 2 * (2 * math.pi) ** -s * 200000.5 ** (1 - s) / (s - 1)
        assert 0 < est <= bound
        if s >= 2:
            assert est == pytest.approx(direct, rel=1e-9)


# ---------------------------------------------------------------------------
# decay of the normalised operator
# ---------------------------------------------------------------------------

def test_decay_constant_is_fixed(z2):
    rep = operator_decay(z2, TamePotential(1.0, 0.0), ones, n_max=6)
    assert rep.status == "below noise"
    assert np.max(rep.residuals) < 1e-12


def test_decay_odd_observable(z2):
    rep = operator_decay(z2, TamePotential(1.0, 0.0), lambda z: np.real(z), n_max=6)
    assert rep.residuals[0] < 1e-12
    assert rep.passed


def test_decay_exp(exp03):
    rep = operator_decay(exp03, TamePotential(1.25, 0.95), lambda z: np.tanh(np.real(z)), n_max=10)
    assert rep.passed
    assert rep.xi < 1

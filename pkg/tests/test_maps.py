import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from thermoform.errors import NotHyperbolicError, UnknownFamilyError
from thermoform.maps import (
    CATALOG,
    BranchWindow,
    build_catalog_map,
    find_periodic_points,
    sample_julia,
    verify_growth,
    verify_hyperbolic,
)

EVALUATED = [("exp", [0.3]), ("tangent", [0.5]), ("sine", [0.5]), ("power", [2]), ("power", [3]),
             ("quadratic", [0.1])]


# ---------------------------------------------------------------------------
# catalog and inverse branches
# ---------------------------------------------------------------------------

def test_exp_logarithm_branches(exp1):
    z = exp1.inverse_branches(math.e, max_count=3)
    assert np.allclose(z, [1, 1 - 2j * math.pi, 1 + 2j * math.pi], atol=1e-14)


def test_tangent_arctan_branches():
    m = build_catalog_map("tangent", [1.0], check_range=False)
    z = m.inverse_branches(1.0, max_count=2)
    assert np.allclose(z, [math.pi / 4, math.pi / 4 - math.pi], atol=1e-14)


def test_square_roots(z2):
    z = z2.inverse_branches(4.0)
    assert sorted(z.real) == pytest.approx([-2, 2])
    assert np.allclose(z.imag, 0)


def test_unknown_family():
    with pytest.raises(UnknownFamilyError):
        build_catalog_map("weierstrass", [1.0])


def test_metadata_only_family_has_no_evaluator():
    with pytest.raises(UnknownFamilyError):
        build_catalog_map("elliptic")
    assert not CATALOG["schwarzian"].has_evaluator


@pytest.mark.parametrize("family, params", [("exp", [1.0]), ("exp", [0.3 + 0.1j]), ("tangent", [1.5]),
                                            ("quadratic", [0.3]), ("sine", [0.5, 1.0])])
def test_outside_hyperbolic_range(family, params):
    with pytest.raises(NotHyperbolicError, match="not verified hyperbolic"):
        build_catalog_map(family, params)


@pytest.mark.parametrize("family, params", EVALUATED)
def test_preimages_sorted_and_round_trip(family, params):
    m = build_catalog_map(family, params)
    for w in sample_julia(m, 5, seed=1):
        z = m.inverse_branches(w, max_count=15)
        assert np.all(np.abs(m.eval(z) - w) <= 1e-10 * (1 + abs(w)))
        mod = np.abs(z)
        assert np.all(np.diff(mod) >= -1e-12 * mod[1:])


@given(st.floats(-3, 3), st.floats(-3, 3), st.sampled_from(EVALUATED))
def test_round_trip_property(x, y, fam):
    m = build_catalog_map(*fam)
    w = complex(x, y)
    if abs(w) < 1e-3 or (fam[0] == "tangent" and abs(abs(w.imag) - 0.5) < 1e-3 and abs(w.real) < 1e-9):
        return
    z = m.inverse_branches(w, max_count=9)
    with np.errstate(all="ignore"):
        fz = m.eval(z)
    assert np.all(np.abs(fz - w) <= 1e-10 * (1 + abs(w)))


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_enumeration_deterministic(x, y):
    m = build_catalog_map("exp", [0.3])
    a = m.inverse_branches(complex(x, y) + 0.01, max_count=11)
    b = m.inverse_branches(complex(x, y) + 0.01, max_count=11)
    assert a.tobytes() == b.tobytes()


# ---------------------------------------------------------------------------
# growth and hyperbolicity diagnostics
# ---------------------------------------------------------------------------

def test_growth_exp_lambda_one_is_exact(exp1):
    z = np.array([1.0, 2 + 1j, -1 + 3j, 0.5 - 7j])
    r = verify_growth(exp1, z)
    assert r.passed
    assert r.worst_lower_ratio == pytest.approx(1.0) and r.worst_upper_ratio == pytest.approx(1.0)


def test_growth_power_on_circle(z2):
    z = np.exp(2j * np.pi * np.linspace(0, 1, 17))
    r = verify_growth(z2, z)
    assert r.passed and r.worst_lower_ratio == pytest.approx(1.0)


def test_growth_tangent_against_identity():
    m = build_catalog_map("tangent", [0.5])
    z = sample_julia(m, 200, seed=3)
    # tan' = 1 + tan^2, so f' = lam + f^2 / lam
    assert np.allclose(m.deriv(z), 0.5 + m.eval(z) ** 2 / 0.5)
    assert verify_growth(m, z).passed


@pytest.mark.parametrize("family, params", EVALUATED)
def test_growth_sandwich_on_catalog(family, params):
    m = build_catalog_map(family, params)
    r = verify_growth(m, sample_julia(m, 1000, seed=0))
    assert r.passed
    k2 = m.growth.kappa ** 2
    assert 1 - 1e-9 <= r.worst_lower_ratio and r.worst_upper_ratio <= 1 + 1e-9
    assert r.worst_upper_ratio / r.worst_lower_ratio <= k2 * (1 + 1e-9)


def test_growth_profile_invariants():
    for family, params in EVALUATED:
        g = build_catalog_map(family, params).growth
        assert g.alpha2_lower <= g.alpha2_upper
        assert g.alpha1 > -g.alpha2_lower
        if g.entire:
            assert g.alpha2_lower == g.alpha2_upper


def test_exp_hyperbolic_attracting_fixed_point(exp03):
    r = verify_hyperbolic(exp03)
    assert r.passed
    (cyc,) = r.attracting_cycles
    assert cyc.period == 1
    p = cyc.points[0]
    assert abs(p - 0.3 * cmath.exp(p)) < 1e-9
    assert abs(p.real - 0.489) < 1e-3


def test_power_expansion_rate(z2):
    r = verify_hyperbolic(z2)
    assert r.passed
    assert r.expansion_gamma == pytest.approx(2.0, rel=1e-9)


def test_exp_lambda_one_not_hyperbolic(exp1):
    r = verify_hyperbolic(exp1, budget=200)
    assert not r.passed
    assert r.status in ("inconclusive", "not hyperbolic")


# ---------------------------------------------------------------------------
# periodic points
# ---------------------------------------------------------------------------

def test_power_fixed_point(z2):
    assert np.allclose(find_periodic_points(z2, 1), [1.0])


def test_power_period_two(z2):
    pts = find_periodic_points(z2, 2)
    expected = np.exp(2j * np.pi * np.arange(3) / 3)
    assert pts.size == 3
    assert all(np.min(np.abs(pts - e)) < 1e-10 for e in expected)


def test_exp_repelling_fixed_point_in_strip(exp03):
    pts = find_periodic_points(exp03, 1, window=BranchWindow(max_count=7))
    strip = [p for p in pts if math.pi < p.imag < 3 * math.pi]
    assert len(strip) == 1
    p = strip[0]
    assert abs(0.3 * cmath.exp(p) - p) < 1e-10
    assert abs(0.3 * cmath.exp(p)) > 1


@pytest.mark.parametrize("family, params, n", [("quadratic", [0.1], 4), ("exp", [0.3], 2), ("power", [3], 3)])
def test_periodic_points_repel(family, params, n):
    m = build_catalog_map(family, params)
    pts = find_periodic_points(m, n)
    assert pts.size > 0
    assert np.all(np.abs(m.deriv_n(pts, n)) > 1)
    assert np.all(np.abs(m.iterate(pts, n) - pts) <= 1e-9 * (1 + np.abs(pts)))

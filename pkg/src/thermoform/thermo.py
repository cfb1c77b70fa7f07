"""Pressure, conformal and Gibbs measures, and their derivatives."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import logsumexp

from .engines import TreeModel, default_bases, make_model
from .errors import DomainError, NotConvergedWarning
from .maps import AnalyticMap, BranchWindow, find_periodic_points, sample_julia
from .potentials import (
    GeometricObservable, HolderObservable, Observable, TamePotential, birkhoff_sum, log_deriv,
)
from .transfer import expand_tree

FD_EPS = 1e-3


# ---------------------------------------------------------------------------
# pressure
# ---------------------------------------------------------------------------

def ratio_estimate(log_masses):
    """Pressure from consecutive ratios ``log L^k 1 - log L^{k-1} 1``.

    Averages the last ``ceil(n/3)`` ratios; when they move monotonically the
    Aitken delta-squared transform of each consecutive triple is averaged
    instead.  Returns ``(value, extrapolated, ratios)``.
    """
    lm = np.asarray(log_masses, float)
    n = lm.size - 1
    if n < 1:
        raise ValueError("need at least one level")
    r = np.diff(lm)
    tail = r[-max(1, math.ceil(n / 3)):]
    d = np.diff(tail)
    if tail.size >= 3 and (np.all(d > 0) or np.all(d < 0)):
        d2 = tail[2:] - 2 * tail[1:-1] + tail[:-2]
        ok = np.abs(d2) > 1e-15 * (1 + np.abs(tail[2:]))
        if np.any(ok):
            ait = tail[2:][ok] - (tail[2:][ok] - tail[1:-1][ok]) ** 2 / d2[ok]
            # keep the least-extrapolated triple when the sequence is near round-off
            return float(ait[-1]), True, r
    return float(np.mean(tail)), False, r


@dataclass
class PressureEstimate:
    value: float
    depth: int
    base_points: list
    spread: float
    tail_fraction: float
    extrapolated: bool
    per_base: list = field(default_factory=list)
    engine: str = "tree"
    converged: bool = True
    eigenvalue_pressure: float = float("nan")
    gap_ratio: float = float("nan")

    def as_dict(self):
        d = asdict(self)
        d["base_points"] = [[float(np.real(b)), float(np.imag(b))] for b in self.base_points]
        return d


def pressure(m: AnalyticMap, phi: TamePotential, bases=None, window: BranchWindow = None, n=None,
             engine="auto", tol=5e-4, model=None, **opts) -> PressureEstimate:
    """``P(phi)`` from consecutive ratios of ``L^k 1`` at several base points."""
    model = model or make_model(m, phi, engine, window=window, depth=n, **opts)
    bases = default_bases(m, 3) if bases is None else np.atleast_1d(np.asarray(bases, np.complex128))
    if n is None:
        n = model.depth if isinstance(model, TreeModel) else 40
    per, flags, tails = [], [], []
    for w in bases:
        v, ex, _ = ratio_estimate(model.log_iterates(w, n))
        per.append(v)
        flags.append(ex)
        tails.append(model.tail_fraction(w))
    per = np.array(per)
    spread = float(per.max() - per.min())
    est = PressureEstimate(
        float(per.mean()), int(n), list(bases), spread, float(max(tails)), bool(any(flags)),
        per.tolist(), model.engine, spread <= tol,
    )
    if model.engine == "collocation":
        est.eigenvalue_pressure = model.pressure
        est.gap_ratio = model.gap_ratio
    if not est.converged:
        warnings.warn(f"pressure not converged: spread {spread:.3g} > {tol:g}", NotConvergedWarning, stacklevel=2)
    return est


def pressure_value(m, phi, engine="auto", **opts):
    """Pressure as a bare float (leading eigenvalue or tree ratio estimate)."""
    model = make_model(m, phi, engine, **opts)
    return float(model.pressure)


# ---------------------------------------------------------------------------
# conformal measure
# ---------------------------------------------------------------------------

@dataclass
class ConformalAtomMeasure:
    points: np.ndarray
    masses: np.ndarray
    levels: np.ndarray
    s: float
    radii: np.ndarray
    mass_outside: np.ndarray
    decay_exponent: float
    expected_exponent: float

    @property
    def total(self):
        return float(self.masses.sum())

    def integrate(self, g):
        return float(np.dot(self.masses, g(self.points)))


def tightness_exponent(m: AnalyticMap, phi: TamePotential):
    """``tau_hat * gamma`` with ``tau_hat = alpha1 + tau`` and ``gamma = (t - rho/tau_hat)/2``."""
    g = m.growth
    th = g.alpha1 + phi.tau
    if th <= 0:
        return 0.0
    return th * (phi.t - g.order / th) / 2


def conformal_measure(m: AnalyticMap, phi: TamePotential, s, N=3, w=None, window: BranchWindow = None,
                      radii=None) -> ConformalAtomMeasure:
    """Atoms of ``nu_s = sum_n e^{-ns} (L^n)^* delta_w / Sigma_s`` up to depth ``N``."""
    w = complex(m.julia_seed if w is None else w)
    if window is None:
        if m.finite_degree:
            window = BranchWindow(max_count=m.degree)
        else:
            window = BranchWindow(max_count=21, max_modulus=1e9, tail_blocks=True, block_ratio=2.0)
    tree = expand_tree(m, phi, w, N, window)
    pts, lw, lev = [], [], []
    for k in range(1, N + 1):
        L = tree.levels[k]
        pts.append(L.points)
        lw.append(L.log_weight - k * s)
        lev.append(np.full(L.points.size, k))
    pts = np.concatenate(pts)
    lw = np.concatenate(lw)
    lev = np.concatenate(lev)
    tot = logsumexp(lw)
    if not np.isfinite(tot) or tot < -700:
        raise DomainError("partial sum Sigma_s below floating range")
    mass = np.exp(lw - tot)
    mods = np.abs(pts)
    if radii is None:
        lo = max(10 * abs(w), 10.0)
        hi = window.max_modulus / 10 if np.isfinite(window.max_modulus) else mods.max()
        radii = np.geomspace(lo, max(hi, 2 * lo), 12)
    radii = np.asarray(radii, float)
    order = np.argsort(mods)
    cum = np.cumsum(mass[order][::-1])[::-1]
    idx = np.searchsorted(mods[order], radii, side="right")
    outside = np.array([cum[i] if i < cum.size else 0.0 for i in idx])
    good = outside > 0
    if good.sum() >= 2:
        slope = np.polyfit(np.log(radii[good]), np.log(outside[good]), 1)[0]
        expo = float(-slope)
    else:
        expo = float("inf")
    return ConformalAtomMeasure(pts, mass, lev, float(s), radii, outside, expo, tightness_exponent(m, phi))


# ---------------------------------------------------------------------------
# density and expectations
# ---------------------------------------------------------------------------

@dataclass
class DensityProfile:
    grid: np.ndarray
    values: np.ndarray
    residual: float
    n: int
    decay_slope: float = float("nan")
    expected_slope: float = float("nan")
    flagged: bool = False


def julia_grid(m: AnalyticMap, k=24, seed=0):
    return np.concatenate([default_bases(m, 1), sample_julia(m, k - 1, seed=seed, depth=8, span=1)])


def far_points(m: AnalyticMap, count=6):
    """Julia points of growing modulus (far lattice branches of the seed)."""
    if m.finite_degree:
        return np.array([], dtype=np.complex128)
    ks = np.unique(np.geomspace(4, 4000, count).astype(int))
    return m.branch(np.array([m.julia_seed]), ks)[0]


def gibbs_density(m: AnalyticMap, phi: TamePotential, pressure_est: PressureEstimate = None, grid=None, n=16,
                  engine="auto", tol=None, model=None, **opts) -> DensityProfile:
    """Cesaro averages ``h_n = (1/n) sum_{k=1}^n L_hat^k 1`` on a grid."""
    model = model or make_model(m, phi, engine, **opts)
    P = model.pressure if pressure_est is None else pressure_est.value
    grid = julia_grid(m) if grid is None else np.atleast_1d(np.asarray(grid, np.complex128))
    ks = np.arange(1, n + 2)
    vals, res = [], []
    for w in grid:
        lhat = np.exp(model.log_iterates(w, n + 1)[1:] - P * ks)
        h = lhat[:n].mean()
        vals.append(h)
        # L_hat h_n - h_n = (L_hat^{n+1} 1 - L_hat 1) / n
        res.append(abs(lhat[n] - lhat[0]) / n)
    vals = np.array(vals)
    prof = DensityProfile(grid, vals, float(max(res)), int(n))
    far = far_points(m)
    if far.size:
        fv = np.array([np.mean(np.exp(model.log_iterates(w, n)[1:] - P * ks[:n])) for w in far])
        prof.decay_slope = float(np.polyfit(np.log(np.abs(far)), np.log(fv), 1)[0])
        prof.expected_slope = -phi.t * (m.growth.alpha2_lower - phi.tau)
    prof.flagged = bool(np.any(vals <= 0) or (tol is not None and prof.residual > tol))
    return prof


def gibbs_expectation(m: AnalyticMap, phi: TamePotential, psi, n=None, window=None, base=None, engine="auto",
                      model=None, **opts):
    """``int psi d mu_phi``."""
    model = model or make_model(m, phi, engine, window=window, depth=n, base=base, **opts)
    return float(model.expectation(psi))


def pressure_gradient(m: AnalyticMap, phi: TamePotential, psi, engine="auto", model=None, **opts):
    """``d/de P(phi + e psi)`` at 0, as the Gibbs integral of ``psi``."""
    return gibbs_expectation(m, phi, psi, engine=engine, model=model, **opts)


def perturbed(phi: TamePotential, eps, psi):
    return phi.plus_observable(eps, psi)


def pressure_fd(m: AnalyticMap, phi: TamePotential, psi, eps=FD_EPS, order=1, engine="auto", **opts):
    """Central finite differences of ``e -> P(phi + e psi)`` (first or second order)."""
    Pp = pressure_value(m, perturbed(phi, eps, psi), engine, **opts)
    Pm = pressure_value(m, perturbed(phi, -eps, psi), engine, **opts)
    if order == 1:
        return (Pp - Pm) / (2 * eps)
    P0 = pressure_value(m, phi, engine, **opts)
    return (Pp - 2 * P0 + Pm) / eps ** 2


# ---------------------------------------------------------------------------
# correlations and variance
# ---------------------------------------------------------------------------

def fit_decay(values, start=None):
    """``xi`` from a log-linear fit of ``|values[k]|`` over the later lags."""
    c = np.abs(np.asarray(values, float))
    k = np.arange(c.size)
    start = c.size // 2 if start is None else start
    sel = (k >= start) & (c > 1e-14 * max(c.max(), 1e-300))
    if sel.sum() < 2:
        sel = (k >= 1) & (c > 1e-14 * max(c.max(), 1e-300))
    if sel.sum() < 2:
        return 0.0
    return float(math.exp(np.polyfit(k[sel], np.log(c[sel]), 1)[0]))


def correlation(m: AnalyticMap, phi: TamePotential, psi1, psi2, n, engine="auto", model=None, **opts):
    """Centred lag-``n`` covariance ``C_n(psi1, psi2)``."""
    model = model or make_model(m, phi, engine, **opts)
    return float(model.correlations(psi1, psi2, n)[n])


def correlation_decay(m: AnalyticMap, phi: TamePotential, psi1, psi2, kmax=20, engine="auto", model=None, **opts):
    model = model or make_model(m, phi, engine, **opts)
    C = model.correlations(psi1, psi2, kmax)
    return C, fit_decay(C[1:], start=len(C[1:]) // 2)


@dataclass
class VarianceEstimate:
    value: float
    lags: int
    remainder: float
    xi: float
    reliable: bool
    correlations: np.ndarray = None


def asymptotic_variance(m: AnalyticMap, phi: TamePotential, psi, zeta=None, K=40, engine="auto", model=None,
                        noise=1e-13, **opts) -> VarianceEstimate:
    """Green-Kubo ``sigma^2(psi, zeta)``: lag-0 covariance plus both one-sided lag sums to ``K``."""
    if K < 1:
        raise ValueError("K must be >= 1")
    zeta = psi if zeta is None else zeta
    model = model or make_model(m, phi, engine, **opts)
    c_pz = model.correlations(psi, zeta, K)
    c_zp = c_pz if zeta is psi else model.correlations(zeta, psi, K)
    K = c_pz.size - 1
    total = c_pz[0] + c_pz[1:].sum() + c_zp[1:].sum()
    both = np.abs(c_pz[1:]) + np.abs(c_zp[1:])
    if np.all(both <= noise):
        # direction cohomologous to a constant: nothing to fit
        return VarianceEstimate(float(total), int(K), 0.0, 0.0, True, c_pz)
    xi = fit_decay(both, start=both.size // 2)
    tailc = both[-1] if both.size else 0.0
    rem = float(tailc * xi / (1 - xi)) if xi < 1 else float("inf")
    half = both[both.size // 2:]
    reliable = bool(xi < 1 and (half.size < 2 or half[-1] <= half[0] or half[0] < 1e-13))
    if not reliable:
        warnings.warn("correlation series not decaying: variance unreliable", NotConvergedWarning, stacklevel=2)
    return VarianceEstimate(float(total), int(K), rem, xi, reliable, c_pz)


# ---------------------------------------------------------------------------
# cohomology and variational quantities
# ---------------------------------------------------------------------------

@dataclass
class CohomologyReport:
    defect: float
    R_hat: float
    n_points: int
    per_point: np.ndarray


def cohomology_defect(m: AnalyticMap, phi: TamePotential, psi: TamePotential, max_period=3, window=None,
                      engine="auto", pressures=None, **opts) -> CohomologyReport:
    """Compare ``(S_n phi - S_n psi)(z)/n`` at periodic points with ``P(phi) - P(psi)``."""
    if pressures is None:
        pressures = (pressure_value(m, phi, engine, **opts), pressure_value(m, psi, engine, **opts))
    R = pressures[0] - pressures[1]
    diffs = []
    for n in range(1, int(max_period) + 1):
        pts = find_periodic_points(m, n, window=window)
        if pts.size == 0:
            continue
        d = (birkhoff_sum(phi, m, pts, n) - birkhoff_sum(psi, m, pts, n)) / n
        diffs.append(d)
    if not diffs:
        raise DomainError("no periodic points found")
    d = np.concatenate(diffs)
    return CohomologyReport(float(np.max(np.abs(d - R))), float(R), int(d.size), d)


def entropy_and_lyapunov(m: AnalyticMap, phi: TamePotential, engine="auto", model=None, **opts):
    """``h_mu = P - int phi dmu`` and ``chi_mu = int log|f'| dmu``."""
    model = model or make_model(m, phi, engine, **opts)
    P = float(model.pressure)
    h = P - model.expectation(phi)
    chi = model.expectation(log_deriv(0.0))
    return {"h_mu": float(h), "chi_mu": float(chi), "pressure": P}


def conformal_defect(m: AnalyticMap, phi: TamePotential, tests, engine="auto", model=None, **opts):
    """``max |<L g, m> - e^P <g, m>|`` over test functions of ``z``."""
    model = model or make_model(m, phi, engine, **opts)
    lam = math.exp(model.pressure)
    worst = 0.0
    for g in tests:
        lhs = _integrate_Lg(model, g)
        rhs = lam * model.conformal_integral(g)
        worst = max(worst, abs(lhs - rhs))
    return worst


def _integrate_Lg(model, g):
    """``<L g, m_hat>`` using the model's own conformal functional."""
    if model.engine == "collocation":
        # L g = W * (first_step g); its m_hat-integral is l . A (first_step g) / (l . G_1)
        q = model.first_step(g)
        return float(model.ell @ (model.A @ q)) / float(model.ell @ model.first_step(None))
    tr = model.tree()
    m = model.m
    num = 0.0
    # one extra level below the leaves: sum over leaves y of e^{S_n phi(y)} (L g)(y)
    from .transfer import apply_transfer

    lw = tr.leaves.log_weight
    shift = lw.max()
    for y, l in zip(tr.leaves.points, lw):
        num += math.exp(l - shift) * apply_transfer(m, model.phi, g, y, model.window).value
    return num * math.exp(shift) / math.exp(tr.log_mass())


def periodic_orbit_pressure(m: AnalyticMap, t, max_period=12, window=None):
    """Pressure of ``-t log|f'|`` from periodic orbits.

    Uses ``log Z_n - log Z_{n-1}`` with ``Z_n = sum_{f^n z = z} |(f^n)'(z)|^{-t}``
    (Aitken-accelerated).  Independent of the transfer-operator routes; for
    finite-degree maps the point counts are exact.
    """
    logs = [0.0]
    for n in range(1, int(max_period) + 1):
        pts = find_periodic_points(m, n, window=window)
        d = np.abs(m.deriv_n(pts, n))
        logs.append(float(logsumexp(-t * np.log(d))))
    lm = np.array(logs)
    r = np.diff(lm[1:])
    if r.size >= 3:
        d2 = r[-1] - 2 * r[-2] + r[-3]
        if abs(d2) > 1e-15:
            return float(r[-1] - (r[-1] - r[-2]) ** 2 / d2)
    return float(r[-1])

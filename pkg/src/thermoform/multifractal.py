"""Bowen dimension, temperature function, multifractal spectrum, sweeps."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .engines import make_model
from .errors import BracketError, DomainError, NotHyperbolicError, NotTameError
from .maps import AnalyticMap, build_catalog_map, find_periodic_points
from .potentials import TamePotential, log_deriv, select_tau
from .thermo import FD_EPS, asymptotic_variance, pressure_value

TAU_POSITIONS = (0.9, 0.95, 0.99)


def _geometric(m: AnalyticMap, t, position):
    tau = 0.0 if m.finite_degree else select_tau(m, t, position)
    return TamePotential(float(t), tau)


def default_bracket(m: AnalyticMap):
    g = m.growth
    if m.finite_degree:
        return (0.5, 2.5)
    return (g.order / g.alpha + 0.05, 2.5)


# ---------------------------------------------------------------------------
# Bowen dimension
# ---------------------------------------------------------------------------

@dataclass
class BowenResult:
    h: float
    residual: float
    tau_position: float
    tau: float
    samples: list = field(default_factory=list)

    def __float__(self):
        return self.h


def bowen_dimension(m: AnalyticMap, bracket=None, tol=1e-12, engine="auto", positions=TAU_POSITIONS,
                    **opts) -> BowenResult:
    """Zero of ``t -> P(-t log|f'|_tau)`` with ``tau`` re-selected per ``t``."""
    lo, hi = bracket or default_bracket(m)
    samples = []
    for pos in positions:

        def P(t):
            v = pressure_value(m, _geometric(m, t, pos), engine, **opts)
            samples.append((pos, float(t), v))
            return v

        try:
            plo, phi_ = P(lo), P(hi)
        except NotTameError:
            continue
        if plo > 0 > phi_:
            h = brentq(P, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)
            res = P(h)
            tau = _geometric(m, h, pos).tau
            return BowenResult(float(h), float(res), pos, tau, samples)
    raise BracketError(f"no sign change of the pressure on [{lo}, {hi}]", samples)


def periodic_orbit_dimension(m: AnalyticMap, max_period=12, bracket=(0.5, 2.5)):
    """Bowen root from periodic-orbit sums (independent of the operator routes)."""
    data = []
    for n in range(max_period - 3, max_period + 1):
        pts = find_periodic_points(m, n)
        data.append(np.log(np.abs(m.deriv_n(pts, n))))

    def P(t):
        lz = np.array([logsumexp(-t * d) for d in data])
        r = np.diff(lz)
        d2 = r[-1] - 2 * r[-2] + r[-3]
        return float(r[-1] - (r[-1] - r[-2]) ** 2 / d2) if abs(d2) > 1e-15 else float(r[-1])

    return float(brentq(P, *bracket, xtol=1e-12))


# ---------------------------------------------------------------------------
# temperature
# ---------------------------------------------------------------------------

def normalize_potential(m: AnalyticMap, phi: TamePotential, engine="auto", tol=1e-9, **opts):
    """``phi - P(phi)`` (the constant goes into ``h``)."""
    P = pressure_value(m, phi, engine, **opts)
    out = phi.shifted(-P)
    check = pressure_value(m, out, engine, **opts)
    if abs(check) > tol:
        warnings.warn(f"normalised pressure {check:.3g} exceeds {tol:g}", RuntimeWarning, stacklevel=2)
    return out


def _combined(phi: TamePotential, q, T):
    """``q phi - T log|f'|_tau`` as a potential with the same ``tau``."""
    return TamePotential(T + q * phi.t, phi.tau, phi.h.scaled(q), phi.beta, phi.kind)


def _s_min(m: AnalyticMap, phi: TamePotential):
    g = m.growth
    if m.finite_degree:
        return -math.inf
    return g.order / (g.alpha1 + phi.tau)


def solve_pressure_zero(evaluate, s0, s_min=-math.inf, tol=1e-13, max_iter=60):
    """Zero of a decreasing convex ``s -> P(s)``; ``evaluate(s) -> (P, dP/ds, extra)``.

    Newton steps kept inside the current bracket (bisection when a step
    leaves it).  Returns ``(s, extra)`` at the accepted point.
    """
    lo, hi = s_min, math.inf
    s = float(s0)
    if s <= s_min:
        s = s_min + 0.05
    samples = []
    for _ in range(max_iter):
        P, d, extra = evaluate(s)
        samples.append((s, P))
        if abs(P) <= tol:
            return s, extra
        if P > 0:
            lo = s
        else:
            hi = s
        new = s - P / d if d < 0 else math.nan
        if not (lo < new < hi):
            if math.isfinite(lo) and math.isfinite(hi):
                new = 0.5 * (lo + hi)
            elif math.isfinite(hi):
                new = hi - max(1.0, 2 * abs(hi)) if not math.isfinite(lo) else 0.5 * (lo + hi)
            else:
                new = s + max(0.5, 2 * (s - lo)) if math.isfinite(lo) else s + 1.0
        if abs(new - s) <= 4e-16 * max(1.0, abs(s)):
            return new, extra
        s = new
    raise BracketError("pressure zero not found", samples)


def temperature(m: AnalyticMap, phi: TamePotential, q, guess=None, engine="auto", tol=1e-13, return_model=False,
                **opts):
    """``T(q)`` with ``P(q phi - T log|f'|_tau) = 0`` for normalised ``phi``.

    Works in ``s = T + q t`` (the exponent of ``log|f'|_tau``), which must stay
    above ``rho / tau_hat``; the slope ``dP/ds = -int log|f'|_tau dmu`` comes
    from the same model.
    """
    q = float(q)
    smin = _s_min(m, phi)
    ld = log_deriv(phi.tau)

    def evaluate(s):
        model = make_model(m, _combined(phi, q, s - q * phi.t), engine, **opts)
        return float(model.pressure), -float(model.expectation(ld)), model

    s0 = (guess + q * phi.t) if guess is not None else (phi.t if math.isfinite(smin) else 1.0)
    s, model = solve_pressure_zero(evaluate, s0, smin, tol)
    T = float(s - q * phi.t)
    return (T, model) if return_model else T


@dataclass
class TemperatureCurve:
    q: np.ndarray
    T: np.ndarray
    T1_analytic: np.ndarray
    T1_fd: np.ndarray
    T2: np.ndarray
    potential: str
    normalization: float
    chi: np.ndarray = None
    variance: np.ndarray = None

    @property
    def alpha(self):
        return -self.T1_analytic

    @property
    def F(self):
        return self.T + self.q * self.alpha

    def variance_mismatch(self):
        """Relative gap between ``chi T''`` and the Green-Kubo variance (interior points)."""
        lhs = self.chi[1:-1] * self.T2[1:-1]
        rhs = self.variance[1:-1]
        scale = np.maximum(np.abs(rhs), 1e-12)
        return np.abs(lhs - rhs) / scale

    def checks(self):
        return {
            "decreasing": bool(np.all(np.diff(self.T) < 0)),
            "T1_negative": bool(np.all(self.T1_analytic < 0)),
            "convex": bool(np.all(self.T2 >= -1e-6)),
            "T1_routes": float(np.max(np.abs(self.T1_analytic - self.T1_fd) /
                                      np.maximum(1e-3, 1e-2 * np.abs(self.T1_analytic)))),
        }

    def to_csv(self, spectrum=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        a = self.alpha
        F = self.F
        for i in range(self.q.size):
            w.writerow([_fmt(self.q[i]), _fmt(self.T[i]), _fmt(self.T1_analytic[i]), _fmt(self.T1_fd[i]),
                        _fmt(self.T2[i]), _fmt(a[i]), _fmt(F[i])])
        return buf.getvalue()


CSV_COLUMNS = ("q", "T", "T1_analytic", "T1_fd", "T2", "alpha", "F")


def _fmt(x):
    return f"{float(x):.12g}"


def _second_differences(q, T):
    """Second divided differences on a (possibly non-uniform) grid; ends copy their neighbours."""
    T2 = np.empty_like(T)
    for i in range(1, q.size - 1):
        h0, h1 = q[i] - q[i - 1], q[i + 1] - q[i]
        T2[i] = 2 * (h0 * T[i + 1] - (h0 + h1) * T[i] + h1 * T[i - 1]) / (h0 * h1 * (h0 + h1))
    T2[0], T2[-1] = T2[1], T2[-2]
    return T2


def temperature_curve(m: AnalyticMap, phi: TamePotential, q_grid, engine="auto", normalize=True, K=40,
                      **opts) -> TemperatureCurve:
    """``T`` on a grid with two routes for ``T'`` and a variance cross-check of ``T''``."""
    q = np.asarray(sorted(float(x) for x in q_grid))
    if q.size < 5:
        raise ValueError("q grid needs at least 5 points")
    norm = 0.0
    if normalize:
        norm = -pressure_value(m, phi, engine, **opts)
        phi = phi.shifted(norm)
    T = np.empty(q.size)
    T1a = np.empty(q.size)
    chi = np.empty(q.size)
    var = np.empty(q.size)
    # solve outward from the grid point nearest 0 so warm starts stay close
    order = np.argsort(np.abs(q))
    done = {}
    T1f = np.empty(q.size)
    ld = log_deriv(phi.tau)
    for i in order:
        near = [j for j in done if abs(j - i) == 1]
        guess = None
        if near:
            j = near[0]
            guess = T[j] + T1a[j] * (q[i] - q[j])
        try:
            T[i], model = temperature(m, phi, q[i], guess=guess, engine=engine, return_model=True, **opts)
            T1a[i] = _slope(model, phi, ld)
            Tp = temperature(m, phi, q[i] + FD_EPS, guess=T[i] + T1a[i] * FD_EPS, engine=engine, **opts)
            Tm = temperature(m, phi, q[i] - FD_EPS, guess=T[i] - T1a[i] * FD_EPS, engine=engine, **opts)
        except (BracketError, DomainError) as exc:
            warnings.warn(f"temperature failed at q={q[i]:g}: {exc}; curve truncated", RuntimeWarning,
                          stacklevel=2)
            keep = np.array(sorted(done))
            if keep.size < 5:
                raise
            return _finish(q[keep], T[keep], T1a[keep], T1f[keep], chi[keep], var[keep], phi, norm)
        done[i] = T[i]
        T1f[i] = (Tp - Tm) / (2 * FD_EPS)
        chi[i] = model.expectation(log_deriv(0.0))
        direction = phi.as_observable() - float(T1a[i]) * ld
        var[i] = asymptotic_variance(m, None, direction, K=K, model=model).value
    return _finish(q, T, T1a, T1f, chi, var, phi, norm)


def _slope(model, phi, ld):
    """``T'(q) = int phi dmu_q / int log|f'|_tau dmu_q``."""
    return float(model.expectation(phi) / model.expectation(ld))


def _finish(q, T, T1a, T1f, chi, var, phi, norm):
    T2 = _second_differences(q, T)
    return TemperatureCurve(q, T, T1a, T1f, T2, phi.describe(), norm, chi, var)


# ---------------------------------------------------------------------------
# spectrum
# ---------------------------------------------------------------------------

@dataclass
class SpectrumCurve:
    q: np.ndarray
    alpha: np.ndarray
    F: np.ndarray
    alpha_range: tuple
    degenerate: bool
    legendre_ok: bool
    concave: bool
    notes: list = field(default_factory=list)

    def to_csv(self, curve: TemperatureCurve):
        if not self.degenerate:
            return curve.to_csv()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        i = int(np.argmin(np.abs(curve.q)))
        w.writerow([_fmt(curve.q[i]), _fmt(curve.T[i]), _fmt(curve.T1_analytic[i]), _fmt(curve.T1_fd[i]),
                    _fmt(curve.T2[i]), _fmt(self.alpha[0]), _fmt(self.F[0])])
        return buf.getvalue()


def legendre_check(q, T, alpha, slack=1):
    """For interior ``q_i``, ``argmin_j (alpha_i q_j + T_j)`` lies within ``slack`` grid steps of ``i``."""
    ok = True
    for i in range(1, q.size - 1):
        j = int(np.argmin(alpha[i] * q + T))
        ok &= abs(j - i) <= slack
    return bool(ok)


def spectrum(curve: TemperatureCurve, width_tol=1e-4) -> SpectrumCurve:
    """Parametric Legendre image ``alpha = -T'(q)``, ``F = T + q alpha``."""
    if np.any(curve.T2 < -1e-6):
        raise DomainError("temperature function is not convex on the grid; refusing to emit a spectrum")
    q, T = curve.q, curve.T
    alpha = curve.alpha
    F = curve.F
    lo, hi = float(alpha.min()), float(alpha.max())
    notes = []
    if hi - lo < width_tol:
        i = int(np.argmin(np.abs(q)))
        notes.append("degenerate spectrum")
        return SpectrumCurve(q[i:i + 1], np.array([alpha.mean()]), np.array([F[i]]), (lo, hi), True, True, True,
                             notes)
    leg = legendre_check(q, T, alpha)
    # concavity of F as a function of alpha (alpha decreases with q)
    o = np.argsort(alpha)
    a, f = alpha[o], F[o]
    dd = []
    for i in range(1, a.size - 1):
        h0, h1 = a[i] - a[i - 1], a[i + 1] - a[i]
        if h0 > 0 and h1 > 0:
            dd.append(2 * (h0 * f[i + 1] - (h0 + h1) * f[i] + h1 * f[i - 1]) / (h0 * h1 * (h0 + h1)))
    concave = bool(np.all(np.array(dd) <= 1e-6)) if dd else True
    if np.any(F < -1e-6):
        notes.append("negative F values")
    return SpectrumCurve(q, alpha, F, (lo, hi), False, leg, concave, notes)


def dimension_of_measure(m: AnalyticMap, phi: TamePotential, engine="auto", **opts):
    """Volume Lemma ``h_mu / chi_mu``."""
    from .thermo import entropy_and_lyapunov

    r = entropy_and_lyapunov(m, phi, engine, **opts)
    return r["h_mu"] / r["chi_mu"]


def measure_potential(m: AnalyticMap, phi: TamePotential, q, T):
    """``phi_{q,T} = q phi - T log|f'|_tau``."""
    return _combined(phi, q, T)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass
class SweepTable:
    family: str
    params: list
    values: list
    flagged: list
    smoothness: float
    rows: list = field(default_factory=list)


def smoothness_residual(x, y, window=7, degree=4):
    """Max residual of degree-4 fits over 7 consecutive points, relative to the range of ``y``."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.size < window:
        return 0.0
    rng = float(y.max() - y.min()) or 1.0
    worst = 0.0
    for i in range(x.size - window + 1):
        xs, ys = x[i:i + window], y[i:i + window]
        c = np.polyfit(xs - xs.mean(), ys, degree)
        worst = max(worst, float(np.max(np.abs(np.polyval(c, xs - xs.mean()) - ys))))
    return worst / rng


def quadratic_coefficient(c, dims, degree=3):
    """Small-``c`` response ``a`` in ``d - 1 = a c^2 + O(c^3)``.

    ``(d - 1) / c^2`` is fitted by a polynomial in ``c`` and its intercept
    returned; a plain ``a c^2 + b c^3`` fit is biased by the higher terms.
    """
    c = np.asarray(c, float)
    y = np.asarray(dims, float) - 1
    keep = np.abs(c) > 0
    c, y = c[keep], y[keep]
    deg = min(int(degree), c.size - 1)
    return float(np.polyfit(c, y / c ** 2, deg)[-1])


def parameter_sweep(family_id, param_grid, what="bowen", q_grid=None, phi_t=None, engine="auto", **opts) -> SweepTable:
    """Evaluate ``bowen`` (or a temperature curve) along a parameter grid."""
    params, values, flagged, rows = [], [], [], []
    for p in param_grid:
        pt = tuple(p) if isinstance(p, (tuple, list)) else (p,)
        try:
            m = build_catalog_map(family_id, pt)
        except NotHyperbolicError as exc:
            flagged.append({"params": list(pt), "reason": str(exc)})
            continue
        if what == "bowen":
            v = bowen_dimension(m, engine=engine, **opts).h
            rows.append({"params": list(pt), "h": v})
        elif what == "spectrum":
            t = phi_t if phi_t is not None else 2.0
            phi = TamePotential(t, 0.0 if m.finite_degree else select_tau(m, t, 0.9))
            curve = temperature_curve(m, phi, q_grid, engine=engine, **opts)
            v = float(curve.T[int(np.argmin(np.abs(curve.q)))])
            rows.append({"params": list(pt), "T": curve.T.tolist(), "alpha": curve.alpha.tolist()})
        else:
            raise ValueError("what must be 'bowen' or 'spectrum'")
        params.append(pt[0] if len(pt) == 1 else pt)
        values.append(v)
    x = np.array([np.real(p) if not isinstance(p, tuple) else np.real(p[0]) for p in params], float)
    sm = smoothness_residual(x, values) if len(values) >= 7 else 0.0
    return SweepTable(family_id, params, values, flagged, sm, rows)

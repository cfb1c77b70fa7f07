"""The tau-metric, tame potentials and Birkhoff sums.

For a map ``f`` and ``tau`` the derivative in the metric ``|z|**-tau |dz|``
is ``|f'(z)|_tau = |f'(z)| |z|**tau / |f(z)|**tau``.  A tame potential is
``phi = -t log|f'|_tau + h`` with ``h`` bounded and weakly Hoelder.

Observables are evaluated on :class:`PointData`, which carries the logs of
``|z|``, ``|f(z)|`` and ``|f'(z)|`` next to ``z`` itself.  This lets the
collocation engine evaluate potentials at preimages far beyond floating
range without ever forming them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import DomainError, NotTameError, PoleError
from .maps import AnalyticMap


@dataclass
class PointData:
    z: np.ndarray
    log_abs_z: np.ndarray
    log_abs_fz: np.ndarray
    log_abs_dfz: np.ndarray

    @classmethod
    def from_points(cls, m: AnalyticMap, z, fz=None):
        """Evaluate the logs directly; ``fz`` may be supplied when known."""
        z = np.asarray(z, dtype=np.complex128)
        if np.any(m.is_pole(z)):
            raise DomainError("point at a pole")
        with np.errstate(divide="ignore"):
            if fz is None:
                fz = m.eval(z)
            dfz = m.deriv(z)
            lz = np.log(np.abs(z))
            lf = np.log(np.abs(fz))
            ld = np.log(np.abs(dfz))
        return cls(z, lz, lf, ld)

    def take(self, idx):
        return PointData(self.z[idx], self.log_abs_z[idx], self.log_abs_fz[idx], self.log_abs_dfz[idx])


def _check_finite_logs(pd: PointData, tau):
    if not np.all(np.isfinite(pd.log_abs_dfz)):
        raise DomainError("derivative vanishes or is infinite (critical point or pole)")
    if tau != 0 and not (np.all(np.isfinite(pd.log_abs_z)) and np.all(np.isfinite(pd.log_abs_fz))):
        raise DomainError("tau-metric singular: z = 0 or f(z) = 0")


def log_tau_derivative(pd: PointData, tau):
    _check_finite_logs(pd, tau)
    if tau == 0:
        return pd.log_abs_dfz
    return pd.log_abs_dfz + tau * (pd.log_abs_z - pd.log_abs_fz)


def tau_derivative(m: AnalyticMap, z, tau):
    """``|f'(z)| |z|**tau / |f(z)|**tau``."""
    pd = PointData.from_points(m, z)
    return np.exp(log_tau_derivative(pd, tau))


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HolderObservable:
    """Bounded function of ``z`` with declared sup and variation bounds."""

    value: Callable
    sup_bound: float
    variation_bound: float = 0.0
    name: str = "h"
    spec: tuple = ()

    def __call__(self, z):
        return np.asarray(self.value(np.asarray(z)), dtype=float) * np.ones(np.shape(z))

    def scaled(self, a):
        f = self.value
        return HolderObservable(
            lambda z: a * f(z), abs(a) * self.sup_bound, abs(a) * self.variation_bound,
            f"{a:g}*{self.name}", ("scaled", a, self.spec),
        )

    def shifted(self, c):
        f = self.value
        return HolderObservable(
            lambda z: f(z) + c, self.sup_bound + abs(c), self.variation_bound,
            f"{self.name}{c:+g}", ("shifted", c, self.spec),
        )

    def plus(self, other: "HolderObservable"):
        f, g = self.value, other.value
        return HolderObservable(
            lambda z: f(z) + g(z), self.sup_bound + other.sup_bound,
            self.variation_bound + other.variation_bound,
            f"{self.name}+{other.name}", ("plus", self.spec, other.spec),
        )

    @property
    def is_constant(self):
        return self.variation_bound == 0.0

    def constant_value(self):
        return float(self(np.array([1.0 + 0j]))[0])


def zero():
    return HolderObservable(lambda z: np.zeros(np.shape(z)), 0.0, 0.0, "zero", ("zero",))


def const(c):
    c = float(c)
    return HolderObservable(lambda z: np.full(np.shape(z), c), abs(c), 0.0, f"const({c:g})", ("const", c))


def re_z_clamped(bound):
    """``bound * tanh(Re z / bound)``: a smooth clamp of ``Re z``."""
    b = float(bound)
    return HolderObservable(
        lambda z: b * np.tanh(np.real(z) / b), b, 1.0, f"re_z_clamped({b:g})", ("re_z_clamped", b)
    )


def table(xs, ys):
    """Piecewise-linear function of ``Re z`` through ``(xs, ys)``, flat outside."""
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    slope = float(np.max(np.abs(np.diff(ys) / np.diff(xs)))) if xs.size > 1 else 0.0
    return HolderObservable(
        lambda z: np.interp(np.real(z), xs, ys), float(np.max(np.abs(ys))), slope,
        "table", ("table", tuple(xs), tuple(ys)),
    )


def observable_from_spec(spec):
    """Build a named observable from a config entry."""
    if spec in (None, "zero", 0, 0.0):
        return zero()
    if isinstance(spec, (int, float)):
        return const(spec)
    if isinstance(spec, dict):
        kind = spec.get("kind", "zero")
        if kind == "zero":
            return zero()
        if kind == "const":
            return const(spec["c"])
        if kind == "re_z_clamped":
            return re_z_clamped(spec["bound"])
        if kind == "table":
            return table(spec["x"], spec["y"])
    raise ValueError(f"unknown observable spec {spec!r}")


def estimate_variation(h: HolderObservable, points, beta=1.0, radius=0.5):
    """Empirical beta-variation of ``h`` over close pairs of ``points``."""
    z = np.asarray(points, dtype=np.complex128)
    d = np.abs(z[:, None] - z[None, :])
    hv = h(z)
    dh = np.abs(hv[:, None] - hv[None, :])
    close = (d > 0) & (d < radius)
    if not np.any(close):
        return 0.0
    return float(np.max(dh[close] / d[close] ** beta))


@dataclass(frozen=True)
class Observable:
    """Real function evaluated on :class:`PointData` (may be unbounded)."""

    func: Callable
    name: str = "psi"

    def __call__(self, pd: PointData):
        return np.asarray(self.func(pd), dtype=float) * np.ones(np.shape(pd.z))

    def at(self, m: AnalyticMap, z):
        return self(PointData.from_points(m, z))

    def __add__(self, other):
        if isinstance(other, (int, float)):
            c = float(other)
            return Observable(lambda pd, f=self.func: f(pd) + c, f"{self.name}+{c:g}")
        f, g = self.func, _as_observable(other).func
        return Observable(lambda pd: f(pd) + g(pd), f"{self.name}+{other.name}")

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, a):
        if isinstance(a, Observable):
            f, g = self.func, a.func
            return Observable(lambda pd: f(pd) * g(pd), f"{self.name}*{a.name}")
        a = float(a)
        f = self.func
        return Observable(lambda pd: a * f(pd), f"{a:g}*{self.name}")

    __rmul__ = __mul__

    def __neg__(self):
        return (-1.0) * self


def _as_observable(x):
    if isinstance(x, Observable):
        return x
    if isinstance(x, TamePotential):
        return x.as_observable()
    if isinstance(x, HolderObservable):
        return Observable(lambda pd: x(pd.z), x.name)
    if isinstance(x, (int, float)):
        return constant(x)
    raise TypeError(f"cannot use {x!r} as an observable")


def constant(c):
    c = float(c)
    return Observable(lambda pd: np.full(np.shape(pd.z), c), f"{c:g}")


def log_deriv(tau=0.0):
    """``log|f'|_tau`` (``tau = 0``: Euclidean ``log|f'|``)."""
    return Observable(lambda pd: log_tau_derivative(pd, tau), f"log|f'|_{tau:g}")


def of_z(func, name="psi"):
    return Observable(lambda pd: func(pd.z), name)


# ---------------------------------------------------------------------------
# tame potentials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TamePotential:
    """``-t log|f'|_tau + h``."""

    t: float
    tau: float
    h: HolderObservable = field(default_factory=zero)
    beta: float = 1.0
    kind: str = "tame"

    def __post_init__(self):
        if self.kind not in ("tame", "loosely_tame"):
            raise ValueError("kind must be 'tame' or 'loosely_tame'")
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")

    def check_tame(self, m: AnalyticMap):
        """Raise unless ``t (alpha1 + tau) > rho`` and ``tau`` is admissible."""
        g = m.growth
        if self.kind != "tame":
            return
        if self.tau == 0 and not g.finite_degree:
            raise NotTameError("tau = 0 only allowed for finite-degree maps")
        if not (0 <= self.tau < g.alpha2_lower or (g.finite_degree and self.tau <= g.alpha2_lower)):
            raise NotTameError(f"tau={self.tau} outside [0, {g.alpha2_lower})")
        if g.finite_degree:
            return  # finitely many preimages: every t gives a finite operator
        if not self.t * (g.alpha1 + self.tau) > g.order:
            raise NotTameError(
                f"t={self.t}, tau={self.tau}: t*(alpha1+tau)={self.t * (g.alpha1 + self.tau):.4g} <= order {g.order}"
            )

    def __call__(self, pd: PointData):
        return -self.t * log_tau_derivative(pd, self.tau) + self.h(pd.z)

    def value(self, m: AnalyticMap, z):
        return self(PointData.from_points(m, z))

    def as_observable(self):
        return Observable(self.__call__, self.describe())

    def with_t(self, t):
        return replace(self, t=float(t))

    def with_tau(self, tau):
        return replace(self, tau=float(tau))

    def shifted(self, c):
        return replace(self, h=self.h.shifted(c))

    def plus_observable(self, eps, psi):
        """``phi + eps * psi`` where ``psi`` is geometric or a Hoelder function.

        Geometric perturbations ``a * log|f'|_tau`` (same ``tau``) move ``t``;
        anything else must be a :class:`HolderObservable`.
        """
        if isinstance(psi, GeometricObservable):
            if psi.tau != self.tau:
                raise ValueError("geometric perturbation must use the potential's tau")
            return replace(self, t=self.t - eps * psi.coef)
        if isinstance(psi, HolderObservable):
            return replace(self, h=self.h.plus(psi.scaled(eps)))
        if isinstance(psi, (int, float)):
            return self.shifted(eps * float(psi))
        raise TypeError("perturbation must be geometric or Hoelder")

    def describe(self):
        return f"-{self.t:g}*log|f'|_{self.tau:g}+{self.h.name}"

    def as_dict(self):
        return {"t": self.t, "tau": self.tau, "h": self.h.name, "beta": self.beta, "kind": self.kind}


@dataclass(frozen=True)
class GeometricObservable(Observable):
    """``coef * log|f'|_tau``; lets pressure perturbations stay tame."""

    coef: float = 1.0
    tau: float = 0.0


def geometric(coef, tau):
    coef = float(coef)
    tau = float(tau)
    return GeometricObservable(lambda pd: coef * log_tau_derivative(pd, tau), f"{coef:g}*log|f'|_{tau:g}", coef, tau)


def potential_value(phi: TamePotential, m: AnalyticMap, z):
    return phi.value(m, z)


def birkhoff_sum(phi, m: AnalyticMap, z, n):
    """``sum_{k<n} phi(f^k(z))`` along the forward orbit of ``z``."""
    obs = _as_observable(phi)
    z = np.asarray(z, dtype=np.complex128)
    total = np.zeros(np.shape(z))
    with np.errstate(all="ignore"):
        for k in range(int(n)):
            if np.any(m.is_pole(z)):
                raise PoleError(f"orbit hits a pole at step {k}", step=k)
            fz = m.eval(z)
            if not np.all(np.isfinite(fz)):
                raise PoleError(f"orbit hits a pole at step {k}", step=k)
            total = total + obs(PointData.from_points(m, z, fz))
            z = fz
    return total


def select_tau(m: AnalyticMap, t, position=0.75):
    """Point at fraction ``position`` of the admissible tau interval."""
    if not 0 < position < 1:
        raise ValueError("position must lie in (0, 1)")
    g = m.growth
    if t <= 0 and g.order > 0:
        raise NotTameError("potential not tame for this map (t <= 0)")
    lo = max(0.0, g.order / t - g.alpha1) if t > 0 else 0.0
    hi = g.alpha2_lower
    if lo >= hi:
        raise NotTameError(f"potential not tame for this map: t={t} <= rho/alpha={g.order / g.alpha:.4g}")
    return lo + position * (hi - lo)


def tau_interval(m: AnalyticMap, t):
    g = m.growth
    lo = max(0.0, g.order / t - g.alpha1) if t > 0 else 0.0
    return lo, g.alpha2_lower


def geometric_potential(m: AnalyticMap, t, tau="auto", h=None, position=0.75):
    if tau == "auto":
        tau = select_tau(m, t, position)
    return TamePotential(float(t), float(tau), h if h is not None else zero())


def cohomology_gap(m: AnalyticMap, z, n, t, tau):
    """Both sides of the telescoping identity for the metric factor."""
    z = np.asarray(z, dtype=np.complex128)
    lhs = -t * birkhoff_sum(log_deriv(tau), m, z, n)
    fnz = m.iterate(z, n)
    rhs = -t * birkhoff_sum(log_deriv(0.0), m, z, n) - t * tau * (np.log(np.abs(z)) - np.log(np.abs(fnz)))
    return lhs, rhs


def _finite(x):
    return math.isfinite(float(x))

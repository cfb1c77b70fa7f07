"""Nystrom (collocation) model of the transfer operator.

Functions are represented as ``g = W q`` where ``W(w) = |w|**-a`` carries the
decay of the operator at infinity and ``q`` is interpolated on a tensor grid
in chart coordinates.  One application of ``L_phi`` becomes a matrix ``A``
acting on nodal values of ``q``::

    (L g)(w_i) / W(w_i) = sum_s c_is q(z_s),   c_is = qw_s exp(phi(z_s)) W(z_s) / W(w_i)

where ``z_s`` are preimages of the node ``w_i`` (plus quadrature nodes that
stand for the infinite lattice tail).  The leading eigenvalue of ``A`` is
``exp(P(phi))``; its left/right eigenvectors give the conformal measure and
the density, and Gibbs integrals are exact derivatives of the discrete
eigenvalue.

Charts:

* :class:`ExpChart` for ``lam*exp(z)``: the half-plane piece
  ``{|w| >= 1, |arg w| <= pi/2}`` is backward invariant for ``lam < 1/e``.
  Coordinates ``u = log(1 + log|w| / ell)`` (Chebyshev) and ``arg w``
  (Chebyshev).  Branches ``|k| <= K`` are summed directly, with an
  Euler-Maclaurin endpoint correction, and the remainder integral over
  ``x = (K + 1/2) e^v`` uses Gauss-Laguerre in ``v``.  All moduli are handled
  in log space since ``x`` can be astronomically large.
* :class:`AnnulusChart` for ``z**d + c`` with ``|c| < 1/4``: an annulus
  ``r0 <= |w| <= r1`` is backward invariant; Chebyshev in ``|w|`` times a
  trigonometric grid in ``arg w``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import kernels
from .errors import DomainError, NotConvergedWarning
from .maps import AnalyticMap, ExponentialMap, PowerMap, QuadraticMap
from .potentials import HolderObservable, Observable, PointData, TamePotential, _as_observable


def chebyshev(n, a, b):
    """Chebyshev points of the first kind on [a, b] (ascending) and barycentric weights."""
    k = np.arange(n)
    th = np.pi * (k + 0.5) / n
    x = np.cos(th)
    w = (-1.0) ** k * np.sin(th)
    o = np.argsort(x)
    return 0.5 * (a + b) + 0.5 * (b - a) * x[o], w[o]


@dataclass
class SampleSet:
    """Preimage samples of a batch of points, shape (n_points, n_samples)."""

    pd: PointData
    log_qw: np.ndarray  # log quadrature weight
    u: np.ndarray  # chart coordinates of the samples
    v: np.ndarray
    tail: np.ndarray  # True for quadrature (not literal branch) samples
    log_abs_w: np.ndarray  # (n_points,)


class ExpChart:
    kind = "exp"

    def __init__(self, m: ExponentialMap, nu=32, nv=18, direct=10, quad=32, xmax=2.0e4, ell=1.0):
        lam = complex(m.params[0])
        if lam.imag != 0 or not 0 < lam.real < 1 / math.e:
            raise DomainError("exp chart needs real 0 < lam < 1/e")
        self.m = m
        self.log_lam = math.log(lam.real)
        self.nu, self.nv, self.K, self.Q = int(nu), int(nv), int(direct), int(quad)
        self.xmax, self.ell = float(xmax), float(ell)
        self.u_nodes, self.u_w = chebyshev(self.nu, 0.0, math.log1p(self.xmax / self.ell))
        self.v_nodes, self.v_w = chebyshev(self.nv, -math.pi / 2, math.pi / 2)
        X = self.ell * np.expm1(self.u_nodes)
        # far nodes are only ever used through (log|w|, arg w)
        self.nodes = (np.exp(np.minimum(X, 700.0))[:, None] * np.exp(1j * self.v_nodes)[None, :]).ravel()
        self.node_log_abs = np.repeat(X, self.nv)
        self.node_arg = np.tile(self.v_nodes, self.nu)
        ks = np.arange(-self.K - 1, self.K + 2).astype(float)
        wk = np.ones_like(ks)
        wk[[0, -1]] = 0.0
        wk[[1, -2]] -= 1.0 / 24
        wk[[0, -1]] += 1.0 / 24
        self._ks, self._log_wk = ks, np.log(wk)
        self._lag_y, self._lag_w = np.polynomial.laguerre.laggauss(self.Q)

    def params(self):
        return {"chart": "exp", "nu": self.nu, "nv": self.nv, "direct": self.K, "quad": self.Q,
                "xmax": self.xmax, "ell": self.ell}

    def coords(self, log_abs, arg):
        return np.log1p(np.clip(log_abs, 0.0, self.xmax) / self.ell), arg

    def samples(self, points, beta, log_abs=None, arg=None):
        """Branch and tail-quadrature samples of ``points``; ``beta`` is the tail decay rate."""
        points = np.atleast_1d(np.asarray(points, np.complex128))
        X = np.log(np.abs(points)) if log_abs is None else np.asarray(log_abs, float)
        th = np.angle(points) if arg is None else np.asarray(arg, float)
        re = X - self.log_lam
        if np.any(re <= 0):
            raise DomainError("point too close to 0 for the exp chart (|w| <= lam)")
        n = points.size
        # direct lattice sums
        im_d = th[:, None] + 2 * math.pi * self._ks[None, :]
        z_d = re[:, None] + 1j * im_d
        lz_d = np.log(np.abs(z_d))
        lq_d = np.broadcast_to(self._log_wk, z_d.shape)
        # tail integral: x = x0 e^v with e^{-beta v} pulled into the Laguerre weight
        if beta <= 0:
            raise DomainError(f"lattice tail does not converge (beta={beta:g} <= 0)")
        x0 = self.K + 0.5
        v = self._lag_y / beta
        logx = math.log(x0) + v
        lq_t = np.log(self._lag_w) + self._lag_y + logx - math.log(beta)
        x = np.exp(np.minimum(logx, 690.0))
        parts_z, parts_lz, parts_lq = [z_d], [lz_d], [lq_d]
        for sign in (1.0, -1.0):
            ratio = sign * th[:, None] / (2 * math.pi * x[None, :])
            log_im = math.log(2 * math.pi) + logx[None, :] + np.log1p(ratio)
            lz = log_im + 0.5 * np.log1p(np.exp(2 * (np.log(re)[:, None] - log_im)))
            im = sign * np.minimum(np.exp(np.minimum(log_im, 690.0)), 1e300)
            parts_z.append(re[:, None] + 1j * im)
            parts_lz.append(lz)
            parts_lq.append(np.broadcast_to(lq_t, lz.shape))
        z = np.concatenate(parts_z, axis=1)
        lz = np.concatenate(parts_lz, axis=1)
        lq = np.concatenate(parts_lq, axis=1)
        tail = np.zeros(z.shape, bool)
        tail[:, z_d.shape[1]:] = True
        lw = np.broadcast_to(X[:, None], z.shape)
        pd = PointData(z, lz, lw, lw)  # |f(z)| = |f'(z)| = |w|
        u, vv = self.coords(lz, np.angle(z))
        return SampleSet(pd, lq, u, vv, tail, X)

    def rows(self, ss: SampleSet):
        shp = ss.u.shape
        ru = kernels.bary_rows(self.u_nodes, self.u_w, ss.u.ravel()).reshape(shp + (self.nu,))
        rv = kernels.bary_rows(self.v_nodes, self.v_w, ss.v.ravel()).reshape(shp + (self.nv,))
        return ru, rv

    def interp_matrix(self, points):
        u, v = self.coords(np.log(np.abs(points)), np.angle(points))
        ru = kernels.bary_rows(self.u_nodes, self.u_w, u)
        rv = kernels.bary_rows(self.v_nodes, self.v_w, v)
        return (ru[:, :, None] * rv[:, None, :]).reshape(len(points), -1)


class AnnulusChart:
    kind = "annulus"

    def __init__(self, m: AnalyticMap, nr=16, ntheta=31, r0=None, r1=None):
        if not isinstance(m, (PowerMap, QuadraticMap)):
            raise DomainError("annulus chart supports z**d and z**2 + c only")
        d = int(m.degree)
        c = abs(complex(m.params[0])) if isinstance(m, QuadraticMap) else 0.0
        if d == 2 and c >= 0.25:
            raise DomainError("annulus chart needs |c| < 1/4")
        if r0 is None:
            r0 = 0.5  # midway between the roots of r**2 - r + |c|
        if r1 is None:
            r1 = (1 + math.sqrt(1 + 4 * c)) / 2 + 0.3
        self.m = m
        self.r0, self.r1 = float(r0), float(r1)
        self.nu, self.nv = int(nr), int(ntheta) | 1
        self.u_nodes, self.u_w = chebyshev(self.nu, self.r0, self.r1)
        self.v_nodes = -math.pi + 2 * math.pi * (np.arange(self.nv) + 0.5) / self.nv
        self.nodes = (self.u_nodes[:, None] * np.exp(1j * self.v_nodes)[None, :]).ravel()
        self.node_log_abs = np.log(np.abs(self.nodes))
        self.node_arg = np.angle(self.nodes)

    def params(self):
        return {"chart": "annulus", "nr": self.nu, "ntheta": self.nv, "r0": self.r0, "r1": self.r1}

    def samples(self, points, beta=None, log_abs=None, arg=None):
        points = np.atleast_1d(np.asarray(points, np.complex128))
        z = self.m.branch(points, np.arange(self.m.degree))
        pd = PointData.from_points(self.m, z, fz=np.broadcast_to(points[:, None], z.shape))
        r = np.abs(z)
        if np.any(r < self.r0 * (1 - 1e-9)) or np.any(r > self.r1 * (1 + 1e-9)):
            raise DomainError("preimages leave the annulus chart")
        return SampleSet(pd, np.zeros(z.shape), r, np.angle(z), np.zeros(z.shape, bool),
                         np.log(np.abs(points)))

    def rows(self, ss: SampleSet):
        shp = ss.u.shape
        ru = kernels.bary_rows(self.u_nodes, self.u_w, ss.u.ravel()).reshape(shp + (self.nu,))
        rv = kernels.trig_rows(self.v_nodes, ss.v.ravel()).reshape(shp + (self.nv,))
        return ru, rv

    def interp_matrix(self, points):
        ru = kernels.bary_rows(self.u_nodes, self.u_w, np.abs(points))
        rv = kernels.trig_rows(self.v_nodes, np.angle(points))
        return (ru[:, :, None] * rv[:, None, :]).reshape(len(points), -1)


def default_chart(m: AnalyticMap, **opts):
    if isinstance(m, ExponentialMap):
        return ExpChart(m, **opts)
    if isinstance(m, (PowerMap, QuadraticMap)):
        return AnnulusChart(m, **opts)
    raise DomainError(f"no collocation chart for family {m.family_id!r}")


def supports_collocation(m: AnalyticMap):
    try:
        default_chart(m)
    except DomainError:
        return False
    return True


class CollocationModel:
    """Discretised ``L_phi`` with its leading eigen-triple.

    ``decay_fraction`` sets ``W = |w|**-a`` with
    ``a = decay_fraction * t * (alpha2 - tau)``, a fraction of the decay rate
    of ``L 1``.  Different ``tau`` give different matrices for the same
    operator, so agreement across ``tau`` is a genuine discretisation check.
    """

    def __init__(self, m: AnalyticMap, phi: TamePotential, chart=None, decay_fraction=0.5, **chart_opts):
        phi.check_tame(m)
        self.m, self.phi = m, phi
        self.chart = chart if chart is not None else default_chart(m, **chart_opts)
        g = m.growth
        if m.finite_degree:
            self.a = 0.0
            self.beta = None
        else:
            self.a = float(decay_fraction) * phi.t * (g.alpha2_lower - phi.tau)
            # summand ~ |z|^{-(t tau + a)} along a lattice of unit density
            self.beta = phi.t * (g.alpha1 + phi.tau) + self.a - g.order
        self._ss = self.chart.samples(self.chart.nodes, self.beta, log_abs=self.chart.node_log_abs,
                                      arg=self.chart.node_arg)
        self._ru, self._rv = self.chart.rows(self._ss)
        self._logc = self._log_coef(self._ss)
        self.A = kernels.assemble(np.exp(self._logc), self._ru, self._rv)
        self._eig()

    # -- construction -------------------------------------------------------
    def _log_coef(self, ss: SampleSet):
        ph = self.phi(ss.pd)
        return ss.log_qw + ph - self.a * ss.pd.log_abs_z + self.a * ss.log_abs_w[:, None]

    def _eig(self):
        vals, vl, vr = linalg.eig(self.A, left=True, right=True)
        order = np.argsort(-np.abs(vals))
        vals = vals[order]
        i0 = 0
        lead = vals[i0]
        if abs(lead.imag) > 1e-9 * abs(lead) or lead.real <= 0:
            raise DomainError("leading eigenvalue of the discretised operator is not real positive")
        r = vr[:, order[i0]].real
        ell = vl[:, order[i0]].real
        r = r / (np.sum(r) or 1.0)
        ell = ell / (np.sum(ell) or 1.0)
        self.eigenvalue = float(lead.real)
        self.log_eigenvalue = math.log(self.eigenvalue)
        self.gap_ratio = float(abs(vals[1]) / abs(vals[0])) if vals.size > 1 else 0.0
        self.spectrum = vals
        self.r, self.ell = r, ell
        self._lr = float(ell @ r)
        # ell pairs with nodal values through interpolation weights, so only r has a sign
        self.positive = bool(np.all(r > -1e-8 * np.abs(r).max()))
        self.min_ratio = (float(r.min() / np.abs(r).max()), float(ell.min() / np.abs(ell).max()))

    @property
    def pressure(self):
        return self.log_eigenvalue

    @property
    def n(self):
        return self.A.shape[0]

    # -- operator pieces ----------------------------------------------------
    def _values(self, psi, ss: SampleSet):
        if psi is None:
            return 1.0
        if not isinstance(psi, (Observable, HolderObservable, TamePotential, int, float)):
            return np.asarray(psi(ss.pd.z), float)
        obs = _as_observable(psi)
        return np.asarray(obs(ss.pd), float)

    def weighted(self, psi):
        """Matrix of ``q -> L(psi * W q) / W`` at the nodes."""
        vals = self._values(psi, self._ss)
        return kernels.assemble(np.exp(self._logc) * vals, self._ru, self._rv)

    def first_step(self, g, points=None):
        """``L g / W`` at nodes (or at ``points``) for a bounded function ``g`` of z."""
        ss = self._ss if points is None else self.chart.samples(points, self.beta)
        logc = self._logc if points is None else self._log_coef(ss)
        vals = self._values(g, ss) if g is not None else 1.0
        # L g / W(w) = sum qw e^phi g(z) / W(w)
        return np.sum(np.exp(logc + self.a * ss.pd.log_abs_z) * vals, axis=1)

    def rows_at(self, points):
        """Matrix R with ``L(W q)(w) / W(w) = R q`` for arbitrary ``points``."""
        ss = self.chart.samples(points, self.beta)
        ru, rv = self.chart.rows(ss)
        return kernels.assemble(np.exp(self._log_coef(ss)), ru, rv), ss

    def log_W(self, points):
        return -self.a * np.log(np.abs(np.atleast_1d(points)))

    # -- quantities ---------------------------------------------------------
    def log_iterates(self, w, n):
        """``log L^k 1(w)`` for ``k = 0..n`` at one point."""
        w = np.atleast_1d(np.asarray(w, np.complex128))
        out = np.zeros(n + 1)
        if n == 0:
            return out
        lw = self.log_W(w)[0]
        v1 = self.first_step(None, w)[0]
        out[1] = math.log(v1) + lw
        R, _ = self.rows_at(w)
        q = self.first_step(None)
        acc = 0.0
        for k in range(2, n + 1):
            out[k] = math.log(float(R[0] @ q)) + acc + lw
            q = self.A @ q
            s = float(np.abs(q).max())
            q /= s
            acc += math.log(s)
        return out

    def expectation(self, psi):
        """``int psi d mu_phi`` (exact derivative of the discrete pressure)."""
        Ap = self.weighted(psi)
        return float(self.ell @ (Ap @ self.r)) / (self.eigenvalue * self._lr)

    def correlation(self, psi1, psi2, k):
        """Centred ``int psi1 * psi2 o f^k d mu - mu(psi1) mu(psi2)``."""
        m1, m2 = self.expectation(psi1), self.expectation(psi2)
        return self._raw_corr(psi1, psi2, k) - m1 * m2

    def _raw_corr(self, psi1, psi2, k):
        if k == 0:
            v1 = self._values(psi1, self._ss)
            v2 = self._values(psi2, self._ss)
            Ap = kernels.assemble(np.exp(self._logc) * v1 * v2, self._ru, self._rv)
            return float(self.ell @ (Ap @ self.r)) / (self.eigenvalue * self._lr)
        x = self.weighted(psi1) @ self.r / self.eigenvalue
        for _ in range(k - 1):
            x = self.A @ x / self.eigenvalue
        y = self.weighted(psi2) @ x / self.eigenvalue
        return float(self.ell @ y) / self._lr

    def correlations(self, psi1, psi2, kmax):
        """``C_0 .. C_kmax`` sharing one power sequence."""
        m1, m2 = self.expectation(psi1), self.expectation(psi2)
        out = np.empty(kmax + 1)
        out[0] = self._raw_corr(psi1, psi2, 0) - m1 * m2
        A2 = self.weighted(psi2)
        x = self.weighted(psi1) @ self.r / self.eigenvalue
        for k in range(1, kmax + 1):
            out[k] = float(self.ell @ (A2 @ x)) / (self.eigenvalue * self._lr) - m1 * m2
            x = self.A @ x / self.eigenvalue
        return out

    def conformal_integral(self, g):
        """``int g d m_hat`` for the normalised conformal measure."""
        num = float(self.ell @ self.first_step(g))
        den = float(self.ell @ self.first_step(None))
        return num / den

    def density(self, points):
        """Normalised density: ``int rho dm_hat = 1``."""
        points = np.atleast_1d(np.asarray(points, np.complex128))
        q = self.chart.interp_matrix(points) @ self.r
        norm = self._lr / float(self.ell @ self.first_step(None)) * self.eigenvalue
        return np.exp(self.log_W(points)) * q / norm

    def iterate_normalised(self, g, points, n):
        """``L_hat^n g`` at ``points`` with ``L_hat = exp(-P) L``."""
        points = np.atleast_1d(np.asarray(points, np.complex128))
        R, _ = self.rows_at(points)
        if n == 0:
            return np.asarray(g(points), float)
        if n == 1:
            return np.exp(self.log_W(points)) * self.first_step(g, points) / self.eigenvalue
        q = self.first_step(g) / self.eigenvalue
        for _ in range(n - 2):
            q = self.A @ q / self.eigenvalue
        return np.exp(self.log_W(points)) * (R @ q) / self.eigenvalue

    def describe(self):
        return {"engine": "collocation", **self.chart.params(), "nodes": self.n,
                "decay_exponent": self.a, "gap_ratio": self.gap_ratio}

"""Two numerical routes to the same operator, behind one interface.

``tree``
    exact preimage trees with branch windows.  Natural for finite-degree maps
    (nothing is truncated) and the only option for families without a chart.
``collocation``
    the Nystrom model of :mod:`thermoform.collocation`; needed for the
    exponential family, whose branch sums converge far too slowly for trees.

``make_model(m, phi, engine="auto")`` picks ``tree`` for ``z**d`` and
families without a chart, ``collocation`` otherwise.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.special import logsumexp

from .collocation import CollocationModel, supports_collocation
from .errors import DomainError, NotConvergedWarning
from .maps import AnalyticMap, BranchWindow, PowerMap, julia_chains
from .potentials import HolderObservable, Observable, PointData, TamePotential, _as_observable
from .transfer import GibbsTreeMeasure, expand_tree

ENGINES = ("auto", "tree", "collocation")


def default_depth(m: AnalyticMap, window: BranchWindow, budget=5.0e4):
    width = m.degree if m.finite_degree else window.max_count
    return max(2, min(18, int(math.log(budget) / math.log(max(width, 2)))))


def default_bases(m: AnalyticMap, k=3, seed=0):
    """``julia_seed`` plus ``k - 1`` backward-orbit points."""
    pts = [complex(m.julia_seed)]
    if k > 1:
        chains = julia_chains(m, k - 1, 6, seed=seed, span=1)
        pts.extend(complex(c) for c in chains[:, -1])
    return np.array(pts)


def _values(psi, pd: PointData):
    if not isinstance(psi, (Observable, HolderObservable, TamePotential, int, float)):
        return np.asarray(psi(pd.z), float) * np.ones(np.shape(pd.z))
    return np.asarray(_as_observable(psi)(pd), float)


class TreeModel:
    """Tree route.  Quantities come from one tree per base point."""

    engine = "tree"

    def __init__(self, m: AnalyticMap, phi: TamePotential, window: BranchWindow = None, depth=None, base=None):
        phi.check_tame(m)
        self.m, self.phi = m, phi
        self.window = window or BranchWindow(max_count=m.degree or 21)
        self.depth = int(depth) if depth else default_depth(m, self.window)
        self.base = complex(m.julia_seed if base is None else base)
        self._trees = {}
        self._pressure = None

    def tree(self, w=None, n=None):
        key = (complex(self.base if w is None else w), int(self.depth if n is None else n))
        if key not in self._trees:
            self._trees[key] = expand_tree(self.m, self.phi, key[0], key[1], self.window)
        return self._trees[key]

    def log_iterates(self, w, n):
        return self.tree(w, n).log_masses()

    @property
    def pressure(self):
        if self._pressure is None:
            from .thermo import ratio_estimate

            self._pressure = ratio_estimate(self.log_iterates(self.base, self.depth))[0]
        return self._pressure

    def _trim(self, n):
        lo = n // 3
        hi = max(lo + 1, n - n // 3)
        return lo, hi

    def _level_values(self, psi, tr):
        vals = [None]
        for k in range(1, tr.depth + 1):
            L = tr.levels[k]
            pd = PointData.from_points(self.m, L.points, fz=tr.levels[k - 1].points[L.parent])
            vals.append(_values(psi, pd))
        return vals

    def birkhoff_sums(self, psi):
        """``D_k = sum_{j<k} E_k[psi o f^j]`` for ``k = 0..n``, ``E_k`` the level-k leaf measure.

        ``D_k`` is the derivative of ``log L^k 1(w)`` in the direction ``psi``.
        """
        tr = self.tree()
        vals = self._level_values(psi, tr)
        D = [0.0]
        for k in range(1, tr.depth + 1):
            lw = tr.levels[k].log_weight
            mass = np.exp(lw - logsumexp(lw))
            acc = 0.0
            for lv in range(k, 0, -1):
                acc += float(np.dot(mass, vals[lv]))
                if lv > 1:
                    mass = np.bincount(tr.levels[lv].parent, weights=mass, minlength=tr.levels[lv - 1].points.size)
            D.append(acc)
        return np.array(D)

    def expectation(self, psi):
        """Consecutive differences of the Birkhoff sums ``D_k`` (Aitken when monotone).

        This is the exact derivative of the tree pressure estimator.
        """
        from .thermo import ratio_estimate

        return ratio_estimate(self.birkhoff_sums(psi))[0]

    def expectation_trimmed(self, psi):
        """Plain Birkhoff average over the central third of the orbit."""
        meas = GibbsTreeMeasure(self.tree())
        lo, hi = self._trim(self.depth)
        acc = [meas.integrate(_values(psi, meas.orbit_data(self.m, j))) for j in range(lo, hi)]
        return float(np.mean(acc))

    def correlations(self, psi1, psi2, kmax):
        meas = GibbsTreeMeasure(self.tree())
        n = self.depth
        lo, hi = self._trim(n)
        kmax = min(int(kmax), n - lo - 1)
        vals1 = {j: _values(psi1, meas.orbit_data(self.m, j)) for j in range(lo, n)}
        vals2 = {j: _values(psi2, meas.orbit_data(self.m, j)) for j in range(lo, n)}
        m1 = np.mean([meas.integrate(vals1[j]) for j in range(lo, hi)])
        m2 = np.mean([meas.integrate(vals2[j]) for j in range(lo, hi)])
        out = np.empty(kmax + 1)
        for k in range(kmax + 1):
            js = [j for j in range(lo, hi) if j + k < n] or [lo]
            out[k] = np.mean([meas.integrate(vals1[j] * vals2[j + k]) for j in js]) - m1 * m2
        return out

    def correlation(self, psi1, psi2, k):
        return float(self.correlations(psi1, psi2, k)[k])

    def iterate_normalised(self, g, points, n):
        out = []
        for w in np.atleast_1d(points):
            tr = self.tree(w, n)
            out.append(tr.sum(lambda z: _values(g, PointData.from_points(self.m, z)), n) * math.exp(-n * self.pressure))
        return np.array(out)

    def density(self, points, n=None):
        """Cesaro averages ``(1/n) sum_{k=1}^n L_hat^k 1``."""
        n = n or self.depth
        out = []
        for w in np.atleast_1d(points):
            lm = self.log_iterates(w, n)[1:]
            out.append(np.mean(np.exp(lm - self.pressure * np.arange(1, n + 1))))
        return np.array(out)

    def conformal_integral(self, g):
        """``L_hat^n g(w) / L_hat^n 1(w)`` at the deepest level."""
        tr = self.tree()
        num = tr.sum(lambda z: _values(g, PointData.from_points(self.m, z)))
        return num / math.exp(tr.log_mass())

    def tail_fraction(self, w):
        tr = self.tree(w, self.depth)
        lm = tr.log_masses()
        fr = [tr.tail_bound[k] / math.exp(lm[k - 1]) for k in range(1, tr.depth + 1)]
        return float(max(fr)) if fr else 0.0

    def describe(self):
        return {"engine": "tree", "depth": self.depth, "window": self.window.as_dict()}


class _Collocation(CollocationModel):
    engine = "collocation"

    def tail_fraction(self, w):
        ss = self.chart.samples(np.atleast_1d(w), self.beta)
        c = np.exp(self._log_coef(ss) + self.a * ss.pd.log_abs_z)
        tot = float(c.sum())
        return float(c[ss.tail].sum() / tot) if tot > 0 else 0.0


def resolve_engine(m: AnalyticMap, engine="auto"):
    if engine not in ENGINES:
        raise ValueError(f"engine must be one of {ENGINES}")
    if engine == "auto":
        if isinstance(m, PowerMap) or not supports_collocation(m):
            return "tree"
        return "collocation"
    if engine == "collocation" and not supports_collocation(m):
        raise DomainError(f"no collocation chart for {m!r}")
    return engine


def make_model(m: AnalyticMap, phi: TamePotential, engine="auto", window=None, depth=None, base=None, **chart_opts):
    """Build the operator model for ``phi`` on ``m`` with the chosen engine."""
    kind = resolve_engine(m, engine)
    if kind == "tree":
        if not m.finite_degree:
            warnings.warn("tree engine on a transcendental map: branch truncation dominates the error",
                          NotConvergedWarning, stacklevel=2)
        return TreeModel(m, phi, window=window, depth=depth, base=base)
    return _Collocation(m, phi, **chart_opts)

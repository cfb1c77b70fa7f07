"""Truncated transfer operator on preimage trees, and Borel sums.

``L_phi g(w) = sum_{f(z) = w} g(z) exp(phi(z))``.  Trees are expanded breadth
first; weights are kept as logs so depth is limited only by node count.
Discarded mass (branches outside the window, pruned nodes) is tracked per
level.  For lattice families the infinite remainder of a branch sum is
bounded with a Hurwitz zeta function, since ``|c + step*k| >= |step| |k + d|``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, zeta

from . import kernels
from .errors import DivergentSumError, DomainError, EmptyLevelError
from .maps import AnalyticMap, BranchWindow
from .potentials import PointData, TamePotential


@dataclass
class TreeLevel:
    points: np.ndarray
    parent: np.ndarray
    log_weight: np.ndarray  # S_k phi + log multiplicity, cumulative
    phi: np.ndarray  # phi at the node (0 at the root)


@dataclass
class PreimageTree:
    root: complex
    depth: int
    levels: list
    window: BranchWindow
    tail_bound: np.ndarray  # discarded mass per level (one-step, absolute)
    potential: TamePotential = None

    @property
    def leaves(self) -> TreeLevel:
        return self.levels[-1]

    def log_mass(self, k=None):
        """``log L^k 1(root)`` restricted to the tree."""
        lvl = self.levels[self.depth if k is None else k]
        return float(logsumexp(lvl.log_weight))

    def log_masses(self):
        return np.array([self.log_mass(k) for k in range(self.depth + 1)])

    def sum(self, g, k=None):
        """``sum over level-k nodes of g(z) * weight``."""
        lvl = self.levels[self.depth if k is None else k]
        gv = np.asarray(g(lvl.points), dtype=float)
        if not np.all(np.isfinite(gv)):
            raise DomainError("observable unbounded on retained nodes")
        m = lvl.log_weight.max()
        return float(np.sum(gv * np.exp(lvl.log_weight - m)) * math.exp(m))

    def ancestors(self, k):
        """Index arrays mapping each leaf to its level-k ancestor."""
        idx = np.arange(self.levels[-1].points.size)
        for j in range(self.depth, k, -1):
            idx = self.levels[j].parent[idx]
        return idx

    def n_nodes(self):
        return sum(l.points.size for l in self.levels)

    def to_csv(self, path_or_buf=None):
        """Rows ``level,index,parent,re,im,log_weight``."""
        buf = io.StringIO() if path_or_buf is None else path_or_buf
        close = False
        if isinstance(buf, str):
            buf = open(buf, "w", newline="")
            close = True
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "index", "parent", "re", "im", "log_weight"])
        for k, lvl in enumerate(self.levels):
            for i in range(lvl.points.size):
                z = lvl.points[i]
                w.writerow([k, i, int(lvl.parent[i]), repr(float(z.real)), repr(float(z.imag)),
                            repr(float(lvl.log_weight[i]))])
        if close:
            buf.close()
            return None
        return buf.getvalue() if path_or_buf is None else None


def _hurwitz_side(s, q):
    if q <= 0:
        return math.inf
    return float(zeta(s, q))


def lattice_tail_bound(m: AnalyticMap, w, s, k_hi, k_lo):
    """Upper bound on ``sum |z_k|**-s`` over branches ``k > k_hi`` and ``k < k_lo``."""
    if m.finite_degree:
        return 0.0
    off, step = m.lattice(w)
    if s <= 1:
        return math.inf
    d = (off / step).real
    a = abs(step) ** (-s)
    return a * (_hurwitz_side(s, k_hi + 1 + d) + _hurwitz_side(s, -k_lo + 1 - d))


def lattice_tail_estimate(m: AnalyticMap, w, s, k_hi, k_lo, direct=64):
    """Accurate value of the same lattice remainder (direct terms + Euler-Maclaurin)."""
    if m.finite_degree:
        return 0.0
    if s <= 1:
        return math.inf
    off, step = m.lattice(w)
    total = 0.0
    for sign, k0 in ((1, k_hi + 1), (-1, -k_lo + 1)):
        ks = sign * np.arange(k0, k0 + direct)
        total += float(np.sum(np.abs(off + step * ks) ** (-s)))
        # one Euler-Maclaurin block out to ~1e6 times further, then the power-law remainder
        far = int((k0 + direct) * 1e6)
        total += kernels.block_sums(off, step * sign, s, np.array([k0 + direct]), np.array([far]))[0]
        total += abs(step) ** (-s) * (far + 0.5) ** (1 - s) / (s - 1)
    return total


def _phi_at(phi: TamePotential, m: AnalyticMap, z, w):
    pd = PointData.from_points(m, z, fz=w)
    return phi(pd)


def expand_tree(m: AnalyticMap, phi: TamePotential, w, n, window: BranchWindow = None) -> PreimageTree:
    """Breadth-first preimage tree of depth ``n`` rooted at ``w``."""
    window = window or BranchWindow(max_count=m.degree or 21)
    w = complex(w)
    root = TreeLevel(np.array([w]), np.array([-1]), np.zeros(1), np.zeros(1))
    levels = [root]
    tails = np.zeros(int(n) + 1)
    s = phi.t * phi.tau
    hsup = phi.h.sup_bound
    for k in range(1, int(n) + 1):
        prev = levels[-1]
        bs = m.branch_set(prev.points, window, exponent=s)
        rows, cols = np.nonzero(bs.mask)
        z = bs.points[rows, cols]
        parent_pts = prev.points[rows]
        ph = _phi_at(phi, m, z, parent_pts)
        if not np.all(np.isfinite(ph)):
            raise DomainError("potential undefined at a preimage")
        logw = prev.log_weight[rows] + ph + bs.log_mult[rows, cols]
        # discarded: masked branches and the lattice remainder beyond the window/blocks
        disc = np.zeros(prev.points.size)
        if not np.all(bs.mask):
            mr, mc = np.nonzero(~bs.mask)
            zm = bs.points[mr, mc]
            with np.errstate(all="ignore"):
                pm = _phi_at(phi, m, zm, prev.points[mr])
            np.add.at(disc, mr, np.exp(np.where(np.isfinite(pm), pm, -np.inf)) * np.exp(bs.log_mult[mr, mc]))
        if not m.finite_degree:
            disc += _lattice_remainder(m, phi, prev.points, bs, window, s, hsup)
        tails[k] = float(np.sum(np.exp(prev.log_weight) * disc))
        if window.min_weight > 0 and logw.size:
            cut = logw.max() + math.log(window.min_weight)
            keep = logw >= cut
            tails[k] += float(np.sum(np.exp(logw[~keep])))
            rows, z, logw, ph = rows[keep], z[keep], logw[keep], ph[keep]
        if z.size == 0:
            raise EmptyLevelError(f"level {k} is empty; window too tight")
        levels.append(TreeLevel(z, rows.astype(np.int64), logw, ph))
    return PreimageTree(w, int(n), levels, window, tails, phi)


def _lattice_remainder(m, phi, points, bs, window, s, hsup):
    """Bound on the one-step mass of lattice branches never enumerated, per parent."""
    out = np.zeros(points.size)
    span = _covered_span(m, points, bs, window)
    for i, w in enumerate(points):
        k_lo, k_hi = span[i]
        # |f'| and |f| are common to all branches of w for lattice families
        z0 = bs.points[i, 0]
        lg = -phi.t * (math.log(abs(complex(m.deriv(z0)))) - phi.tau * math.log(abs(w)))
        out[i] = math.exp(lg + hsup) * lattice_tail_bound(m, w, s, k_hi, k_lo)
    return out


def _covered_span(m, points, bs, window):
    """Branch-index range covered by the window (and tail blocks)."""
    return [(int(a), int(b)) for a, b in bs.span]


@dataclass
class TransferResult:
    value: float
    tail_bound: float
    tail_estimate: float = float("nan")
    n_terms: int = 0

    @property
    def corrected(self):
        """Retained sum plus the estimated remainder (for constant ``g``)."""
        return self.value + self.tail_estimate


def apply_transfer(m: AnalyticMap, phi: TamePotential, g, w, window: BranchWindow = None) -> TransferResult:
    """One application of the truncated operator at ``w``."""
    phi.check_tame(m)
    window = window or BranchWindow(max_count=m.degree or 21)
    w = complex(w)
    bs = m.branch_set(np.array([w]), window, exponent=phi.t * phi.tau)
    sel = bs.mask[0]
    z = bs.points[0][sel]
    if z.size == 0:
        raise EmptyLevelError("no preimage inside the window")
    lw = _phi_at(phi, m, z, np.full(z.shape, w)) + bs.log_mult[0][sel]
    gv = np.asarray(g(z), dtype=float) * np.ones(z.shape)
    if not np.all(np.isfinite(gv)):
        raise DomainError("observable unbounded on retained nodes")
    value = float(np.sum(gv * np.exp(lw)))
    gsup = float(np.max(np.abs(gv))) if not hasattr(g, "sup_bound") else g.sup_bound
    if m.finite_degree:
        return TransferResult(value, 0.0, 0.0, int(z.size))
    s = phi.t * phi.tau
    (k_lo, k_hi), = _covered_span(m, np.array([w]), bs, window)
    lg = -phi.t * (math.log(abs(complex(m.deriv(z[0])))) - phi.tau * math.log(abs(w)))
    hs = phi.h.sup_bound
    tb = math.exp(lg + hs) * lattice_tail_bound(m, w, s, k_hi, k_lo)
    masked = bs.points[0][~sel]
    if masked.size:
        with np.errstate(all="ignore"):
            pm = _phi_at(phi, m, masked, np.full(masked.shape, w))
        tb += float(np.sum(np.exp(pm)))
    h_far = phi.h.constant_value() if phi.h.is_constant else 0.0
    est = math.exp(lg + h_far) * lattice_tail_estimate(m, w, s, k_hi, k_lo)
    gc = gv[0] if np.allclose(gv, gv[0]) else float("nan")
    return TransferResult(value, gsup * tb, gc * est, int(z.size))


@dataclass
class BorelSum:
    value: float
    tail_bound: float
    tail_estimate: float
    n_terms: int

    @property
    def corrected(self):
        return self.value + self.tail_estimate


def borel_sum(m: AnalyticMap, u, a, window: BranchWindow = None) -> BorelSum:
    """Truncated ``sum_{f(z)=a} |z|**-u`` with remainder bound and estimate."""
    rho = m.growth.order
    if not u > rho:
        raise DivergentSumError(f"divergent sum: u={u} <= order {rho}")
    window = window or BranchWindow(max_count=m.degree or 2001)
    bs = m.branch_set(np.array([complex(a)]), window)
    z = bs.points[0][bs.mask[0]]
    value = float(np.sum(np.abs(z) ** (-u)))
    if m.finite_degree:
        return BorelSum(value, 0.0, 0.0, int(z.size))
    (k_lo, k_hi), = _covered_span(m, np.array([complex(a)]), bs, window)
    tb = lattice_tail_bound(m, complex(a), u, k_hi, k_lo)
    est = lattice_tail_estimate(m, complex(a), u, k_hi, k_lo)
    masked = bs.points[0][~bs.mask[0]]
    tb += float(np.sum(np.abs(masked) ** (-u)))
    tb += 4 * z.size * np.finfo(float).eps * value  # summation roundoff
    est += float(np.sum(np.abs(masked) ** (-u)))
    return BorelSum(value, tb, est, int(z.size))


@dataclass
class GibbsTreeMeasure:
    """Normalised leaf weights ``exp(S_n phi(y)) / sum exp(S_n phi)``."""

    tree: PreimageTree
    weights: np.ndarray = field(init=False)

    def __post_init__(self):
        lw = self.tree.leaves.log_weight
        self.weights = np.exp(lw - logsumexp(lw))

    @property
    def points(self):
        return self.tree.leaves.points

    def integrate(self, values):
        return float(np.dot(self.weights, values))

    def orbit_points(self, j):
        """``f^j`` of every leaf, read off the tree (exact, no forward iteration)."""
        lvl = self.tree.depth - j
        return self.tree.levels[lvl].points[self.tree.ancestors(lvl)]

    def orbit_data(self, m: AnalyticMap, j):
        """:class:`PointData` for ``f^j(leaf)`` using the parent as ``f(z)``."""
        k = self.tree.depth - j
        anc = self.tree.ancestors(k)
        z = self.tree.levels[k].points[anc]
        parent = self.tree.levels[k].parent[anc]
        fz = self.tree.levels[k - 1].points[parent] if k > 0 else m.eval(z)
        return PointData.from_points(m, z, fz=fz)


@dataclass
class DecayReport:
    residuals: np.ndarray  # r_n for n = 1..n_max
    xi: float
    status: str  # "decaying", "below noise", "not decaying"
    integral: float = float("nan")

    @property
    def passed(self):
        return self.status in ("decaying", "below noise")


def operator_decay(m: AnalyticMap, phi: TamePotential, g, n_max=12, grid=None, engine="auto", noise=1e-13,
                   model=None, **opts) -> DecayReport:
    """``r_n = max_grid |L_hat^n g - (int g dm_hat) rho_hat|`` and its geometric rate."""
    from .engines import make_model
    from .thermo import fit_decay, julia_grid

    model = model or make_model(m, phi, engine, **opts)
    grid = julia_grid(m, 8) if grid is None else np.atleast_1d(np.asarray(grid, np.complex128))
    mg = model.conformal_integral(g)
    rho = model.density(grid)
    res = np.array([np.max(np.abs(model.iterate_normalised(g, grid, n) - mg * rho)) for n in range(1, n_max + 1)])
    scale = max(1.0, float(np.max(np.abs(rho))) * max(1.0, abs(mg)))
    fit = res[res.size // 2:]
    if np.all(fit <= noise * scale):
        return DecayReport(res, 0.0, "below noise", mg)
    keep = res > noise * scale
    start = res.size // 2
    xi = fit_decay(np.where(keep, res, 0.0), start=start)
    status = "decaying" if xi < 1 else "not decaying"
    return DecayReport(res, xi, status, mg)

"""Catalog of map families with exact inverse branches.

Each concrete map knows how to evaluate itself, its derivative and every
inverse branch in closed form.  Branches are addressed by an integer offset
from the principal branch; :meth:`AnalyticMap.inverse_branches` turns a
:class:`BranchWindow` into a deterministic, modulus-sorted list of
preimages.

Two finite-degree oracle families (``power`` and ``quadratic``) live next to
the transcendental ones because their pressures and dimensions are known in
closed form or by elementary means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import DomainError, NotHyperbolicError, UnknownFamilyError

INF = float("inf")


@dataclass(frozen=True)
class GrowthProfile:
    """Constants of the two-sided derivative growth bound.

    ``coefficient * kappa**-1 * |z|**alpha1 * |f|**alpha2_lower <= |f'(z)|``
    ``|f'(z)| <= coefficient * kappa * |z|**alpha1 * |f|**alpha2_upper``
    """

    kappa: float
    alpha1: float
    alpha2_lower: float
    alpha2_upper: float
    order: float
    divergence_type: bool
    entire: bool
    coefficient: float = 1.0
    finite_degree: bool = False

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not 0 < self.alpha2_lower <= self.alpha2_upper:
            raise ValueError("need 0 < alpha2_lower <= alpha2_upper")
        if not self.alpha1 > -self.alpha2_lower:
            raise ValueError("need alpha1 > -alpha2_lower")
        if self.entire and self.alpha2_lower != self.alpha2_upper:
            raise ValueError("entire maps have constant alpha2")

    @property
    def alpha(self):
        return self.alpha1 + self.alpha2_lower

    def as_dict(self):
        return {
            "kappa": self.kappa,
            "alpha1": self.alpha1,
            "alpha2_lower": self.alpha2_lower,
            "alpha2_upper": self.alpha2_upper,
            "order": self.order,
            "divergence_type": self.divergence_type,
            "entire": self.entire,
            "coefficient": self.coefficient,
            "finite_degree": self.finite_degree,
        }


@dataclass(frozen=True)
class BranchWindow:
    """Truncation of the (possibly infinite) set of preimages.

    ``max_count`` branches closest to the origin are kept, preimages beyond
    ``max_modulus`` are dropped, and tree nodes whose cumulative weight falls
    below ``min_weight`` times the level maximum are pruned.  With
    ``tail_blocks`` the discarded lattice branches out to ``max_modulus`` are
    lumped into geometric blocks of ratio ``block_ratio``, each carried by a
    single representative preimage.
    """

    max_count: int = 21
    max_modulus: float = INF
    min_weight: float = 0.0
    tail_blocks: bool = False
    block_ratio: float = 2.0

    def __post_init__(self):
        if self.max_count < 1:
            raise ValueError("max_count must be >= 1")
        if not self.max_modulus > 0:
            raise ValueError("max_modulus must be positive")
        if self.min_weight < 0:
            raise ValueError("min_weight must be nonnegative")
        if self.tail_blocks and not (math.isfinite(self.max_modulus) and self.block_ratio > 1):
            raise ValueError("tail blocks need a finite max_modulus and block_ratio > 1")

    def as_dict(self):
        return {
            "max_count": self.max_count,
            "max_modulus": self.max_modulus,
            "min_weight": self.min_weight,
            "tail_blocks": self.tail_blocks,
            "block_ratio": self.block_ratio,
        }


@dataclass
class BranchSet:
    """Preimages of a batch of points, padded to a rectangle.

    ``points[i, q]`` is valid where ``mask[i, q]``; ``log_mult`` is zero for
    ordinary branches and the log of the lumped relative weight for tail
    block representatives (weights relative to ``|z|**-exponent``).
    """

    points: np.ndarray
    mask: np.ndarray
    log_mult: np.ndarray
    block_exponent: float = 0.0
    span: np.ndarray = None  # (n, 2) lowest/highest lattice index covered


@dataclass
class AttractingCycle:
    period: int
    points: list
    multiplier: complex


class AnalyticMap:
    """Base class; concrete families override the closed forms."""

    family_id = ""
    family_code = -1
    degree: Optional[int] = None

    def __init__(self, params):
        self.params = tuple(params)
        self.growth: GrowthProfile = None
        self.singular_values: list = []
        self.julia_seed: complex = 0j

    # -- closed forms -------------------------------------------------------
    def eval(self, z):
        raise NotImplementedError

    def deriv(self, z):
        raise NotImplementedError

    def _kernel_params(self):
        raise NotImplementedError

    def lattice(self, w):
        """(offset, step) with branch j ~ offset + step * j, or None."""
        return None

    @property
    def finite_degree(self):
        return self.degree is not None

    def describe(self):
        return {"family": self.family_id, "params": [_jsonable(p) for p in self.params]}

    def __repr__(self):
        args = ", ".join(repr(p) for p in self.params)
        return f"{type(self).__name__}({args})"

    # -- branches -----------------------------------------------------------
    def branch(self, w, j):
        """Branch ``j`` (offset from principal) of ``f^{-1}`` at ``w``."""
        w = np.atleast_1d(np.asarray(w, dtype=np.complex128))
        return kernels.branch_grid(self.family_code, self._kernel_params(), w, np.atleast_1d(j))

    def _candidate_offsets(self, count):
        if self.finite_degree:
            return np.arange(self.degree)
        m = count
        return np.arange(-m, m + 1)

    def branch_set(self, points, window: BranchWindow, exponent=None):
        """Windowed preimages of many points at once (deterministic order)."""
        points = np.atleast_1d(np.asarray(points, dtype=np.complex128))
        offs = self._candidate_offsets(window.max_count)
        cand = kernels.branch_grid(self.family_code, self._kernel_params(), points, offs)
        mod = np.abs(cand)
        ang = np.angle(cand)
        order = _row_lexsort(mod, ang)
        cand = np.take_along_axis(cand, order, axis=1)
        offs_sorted = offs[order]
        keep = min(window.max_count, cand.shape[1])
        cand = cand[:, :keep]
        offs_sorted = offs_sorted[:, :keep]
        mask = np.abs(cand) <= window.max_modulus
        log_mult = np.zeros(cand.shape)
        span = np.stack([offs_sorted.min(axis=1), offs_sorted.max(axis=1)], axis=1)
        if window.tail_blocks and not self.finite_degree and exponent is not None:
            bp, bm, blm, span = self._tail_blocks(points, offs_sorted, window, exponent)
            cand = np.concatenate([cand, bp], axis=1)
            mask = np.concatenate([mask, bm], axis=1)
            log_mult = np.concatenate([log_mult, blm], axis=1)
        return BranchSet(cand, mask, log_mult, exponent or 0.0, span)

    def _tail_blocks(self, points, offs_sorted, window, exponent):
        """Geometric blocks of lattice branches outside the window."""
        rows_p, rows_l, spans = [], [], []
        for i, w in enumerate(points):
            off, step = self.lattice(w)
            hi = int(offs_sorted[i].max())
            lo = int(offs_sorted[i].min())
            pts, lms, ends = [], [], []
            for sign, start in ((1, hi + 1), (-1, -lo + 1)):
                a = start
                while True:
                    b = max(a, int(math.ceil(a * window.block_ratio)) - 1)
                    ja, jb = (a, b) if sign > 0 else (-b, -a)
                    if abs(off + step * ja) > window.max_modulus and abs(off + step * jb) > window.max_modulus:
                        break
                    rep = sign * int(round(math.sqrt(a * b)))
                    z = self.branch(w, rep)[0, 0]
                    if abs(z) > window.max_modulus:
                        break
                    total = kernels.block_sums(off, step, exponent, np.array([ja]), np.array([jb]))[0]
                    pts.append(z)
                    lms.append(math.log(total) + exponent * math.log(abs(z)))
                    a = b + 1
                ends.append(sign * (a - 1))
            spans.append((ends[1], ends[0]))
            rows_p.append(pts)
            rows_l.append(lms)
        width = max((len(r) for r in rows_p), default=0)
        bp = np.zeros((len(points), width), dtype=np.complex128)
        bm = np.zeros((len(points), width), dtype=bool)
        bl = np.zeros((len(points), width))
        for i, (p, l) in enumerate(zip(rows_p, rows_l)):
            bp[i, : len(p)] = p
            bm[i, : len(p)] = True
            bl[i, : len(l)] = l
        return bp, bm, bl, np.array(spans, dtype=np.int64).reshape(len(points), 2)

    def inverse_branches(self, w, window: BranchWindow = None, max_count=None):
        """Preimages of ``w`` sorted by modulus, then argument."""
        if window is None:
            window = BranchWindow(max_count=max_count or (self.degree or 21))
        bs = self.branch_set(np.array([w]), window)
        return bs.points[0][bs.mask[0]]

    # -- dynamics helpers ---------------------------------------------------
    def iterate(self, z, n):
        z = np.asarray(z, dtype=np.complex128)
        for _ in range(n):
            z = self.eval(z)
        return z

    def deriv_n(self, z, n):
        """(f^n)'(z) by the chain rule along the forward orbit."""
        z = np.asarray(z, dtype=np.complex128)
        d = np.ones_like(z)
        for _ in range(n):
            d = d * self.deriv(z)
            z = self.eval(z)
        return d

    def is_pole(self, z):
        return False

    def critical_points_near(self, z, tol=1e-12):
        return np.abs(self.deriv(z)) < tol


def _tie_round(mod):
    # moduli equal to ~1e-12 relative count as ties
    return np.round(mod, 11 - np.floor(np.log10(np.maximum(mod, 1e-300))).clip(-300, 300).astype(int).max(initial=0))


def _row_lexsort(mod, ang):
    # per-row sort by modulus, ties by argument
    mod = _tie_round(mod)
    order = np.argsort(ang, axis=1, kind="stable")
    mod2 = np.take_along_axis(mod, order, axis=1)
    o2 = np.argsort(mod2, axis=1, kind="stable")
    return np.take_along_axis(order, o2, axis=1)


def _jsonable(p):
    if isinstance(p, complex):
        return p.real if p.imag == 0 else [p.real, p.imag]
    return p


def _inverse_fixed_point(m: AnalyticMap, j, z0, sweeps=200):
    z = complex(z0)
    for _ in range(sweeps):
        z = complex(m.branch(z, j)[0, 0])
    return z


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------

class ExponentialMap(AnalyticMap):
    """``lam * exp(z)``; hyperbolic for real ``lam`` in ``(0, 1/e)``."""

    family_id = "exp"
    family_code = kernels.EXP

    def __init__(self, lam):
        super().__init__((lam,))
        self.lam = complex(lam)
        self.growth = GrowthProfile(1.0, 0.0, 1.0, 1.0, 1.0, True, True)
        self.singular_values = [0j]
        self.julia_seed = _inverse_fixed_point(self, 0, 2.0 + 0.5j)

    def eval(self, z):
        return self.lam * np.exp(z)

    def deriv(self, z):
        return self.lam * np.exp(z)

    def _kernel_params(self):
        return np.array([self.lam], dtype=np.complex128)

    def lattice(self, w):
        return complex(np.log(w / self.lam)), 2j * math.pi


class TangentMap(AnalyticMap):
    """``lam * tan(z)``; hyperbolic for real ``lam`` in ``(0, 1)``."""

    family_id = "tangent"
    family_code = kernels.TAN

    def __init__(self, lam):
        super().__init__((lam,))
        self.lam = complex(lam)
        self.singular_values = [1j * self.lam, -1j * self.lam]
        self.julia_seed = _inverse_fixed_point(self, 0, 1.5)
        lam_r = abs(self.lam)
        xstar = abs(self.julia_seed)
        kappa = max(lam_r, 1.0 / lam_r + lam_r / xstar**2)
        # |f'| = |lam + f^2/lam| and J stays outside (-x*, x*)
        self.growth = GrowthProfile(kappa, 0.0, 2.0, 2.0, 1.0, True, False)
        self.basin_radius = xstar

    def eval(self, z):
        return self.lam * np.tan(z)

    def deriv(self, z):
        return self.lam / np.cos(z) ** 2

    def is_pole(self, z):
        z = np.asarray(z)
        return np.abs(np.cos(z)) < 1e-14

    def _kernel_params(self):
        return np.array([self.lam], dtype=np.complex128)

    def lattice(self, w):
        return complex(np.arctan(w / self.lam)), complex(math.pi)


class SineMap(AnalyticMap):
    """``sin(a z + b)``; verified hyperbolic for real ``a`` in (0, 1), ``b = 0``."""

    family_id = "sine"
    family_code = kernels.SIN

    def __init__(self, a, b=0.0, kappa=None):
        super().__init__((a, b))
        self.a = complex(a)
        self.b = complex(b)
        self.singular_values = [1 + 0j, -1 + 0j]
        self.julia_seed = _inverse_fixed_point(self, 2, 3.0 + 3.0j)
        if kappa is None:
            kappa = self._calibrate_kappa()
        self.growth = GrowthProfile(kappa, 0.0, 1.0, 1.0, 1.0, True, True, coefficient=abs(self.a))

    def _calibrate_kappa(self):
        pts = sample_julia(self, 400, seed=1)
        r = np.abs(self.deriv(pts)) / (abs(self.a) * np.abs(self.eval(pts)))
        return float(max(1.0 / r.min(), r.max()) * 1.05)

    def eval(self, z):
        return np.sin(self.a * z + self.b)

    def deriv(self, z):
        return self.a * np.cos(self.a * z + self.b)

    def _kernel_params(self):
        return np.array([self.a, self.b], dtype=np.complex128)

    def lattice(self, w):
        return -self.b / self.a, math.pi / self.a


class PowerMap(AnalyticMap):
    """``z**d``: Julia set is the unit circle, dimension 1."""

    family_id = "power"
    family_code = kernels.ROOTS

    def __init__(self, d=2):
        d = int(d)
        if d < 2:
            raise NotHyperbolicError("power map needs degree >= 2")
        super().__init__((d,))
        self.degree = d
        # |f'| = d |z|^(d-1) = d |f|^((d-1)/d)
        self.growth = GrowthProfile(
            1.0, 0.0, (d - 1) / d, (d - 1) / d, 0.0, False, True, coefficient=float(d), finite_degree=True
        )
        self.singular_values = [0j]
        self.julia_seed = 1 + 0j

    def eval(self, z):
        return np.asarray(z, dtype=np.complex128) ** self.degree

    def deriv(self, z):
        return self.degree * np.asarray(z, dtype=np.complex128) ** (self.degree - 1)

    def _kernel_params(self):
        return np.array([self.degree, 0.0], dtype=np.complex128)


class QuadraticMap(AnalyticMap):
    """``z**2 + c``; real ``c`` in the main cardioid ``(-3/4, 1/4)``."""

    family_id = "quadratic"
    family_code = kernels.ROOTS

    def __init__(self, c):
        super().__init__((c,))
        self.c = complex(c)
        self.degree = 2
        self.singular_values = [self.c]
        self.julia_seed = complex((1 + np.sqrt(1 - 4 * self.c)) / 2)
        self.growth = GrowthProfile(1.0, 0.0, 0.5, 0.5, 0.0, False, True, coefficient=2.0, finite_degree=True)
        pts = sample_julia(self, 400, seed=1)
        r = np.abs(self.deriv(pts)) / (2.0 * np.abs(self.eval(pts)) ** 0.5)
        kappa = float(max(1.0 / r.min(), r.max()) * 1.001)
        self.growth = GrowthProfile(
            max(kappa, 1.0), 0.0, 0.5, 0.5, 0.0, False, True, coefficient=2.0, finite_degree=True
        )

    def eval(self, z):
        z = np.asarray(z, dtype=np.complex128)
        return z * z + self.c

    def deriv(self, z):
        return 2.0 * np.asarray(z, dtype=np.complex128)

    def _kernel_params(self):
        return np.array([2.0, self.c], dtype=np.complex128)


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FamilyInfo:
    family_id: str
    formula: str
    hyperbolic_range: str
    growth: dict
    has_evaluator: bool = True
    param_names: tuple = field(default_factory=tuple)


CATALOG = {
    "exp": FamilyInfo(
        "exp", "lam*exp(z)", "lam real in (0, 1/e)",
        {"alpha1": 0.0, "alpha2": 1.0, "order": 1.0, "kappa": 1.0, "divergence_type": True},
        param_names=("lam",),
    ),
    "tangent": FamilyInfo(
        "tangent", "lam*tan(z)", "lam real in (0, 1)",
        {"alpha1": 0.0, "alpha2": 2.0, "order": 1.0, "kappa": "1/lam + lam/x*^2", "divergence_type": True},
        param_names=("lam",),
    ),
    "sine": FamilyInfo(
        "sine", "sin(a*z + b)", "a real in (0, 1), b = 0",
        {"alpha1": 0.0, "alpha2": 1.0, "order": 1.0, "kappa": "sampled", "divergence_type": True},
        param_names=("a", "b"),
    ),
    "power": FamilyInfo(
        "power", "z**d", "integer d >= 2",
        {"alpha1": 0.0, "alpha2": "(d-1)/d", "order": 0.0, "coefficient": "d", "finite_degree": True},
        param_names=("d",),
    ),
    "quadratic": FamilyInfo(
        "quadratic", "z**2 + c", "c real in (-3/4, 1/4)",
        {"alpha1": 0.0, "alpha2": 0.5, "order": 0.0, "coefficient": 2.0, "finite_degree": True},
        param_names=("c",),
    ),
    "cosine_root": FamilyInfo(
        "cosine_root", "cos(sqrt(a*z + b))", "metadata only",
        {"alpha1": -0.5, "alpha2": 1.0, "order": 0.5}, has_evaluator=False, param_names=("a", "b"),
    ),
    "elliptic": FamilyInfo(
        "elliptic", "doubly periodic meromorphic f", "metadata only",
        {"alpha1": 0.0, "alpha2_lower": "inf(1 + 1/q_b) over poles b", "order": 2.0},
        has_evaluator=False,
    ),
    "schwarzian": FamilyInfo(
        "schwarzian", "f with rational Schwarzian derivative", "metadata only",
        {"alpha1": "(deg(S)+2)/2 - 1", "alpha2": "1 + 1/q_b", "order": "(deg(S)+2)/2"},
        has_evaluator=False,
    ),
}


def _real_param(p, name):
    p = complex(p)
    if abs(p.imag) > 0:
        raise NotHyperbolicError(f"{name}={p} not verified hyperbolic (complex parameter)")
    return p.real


def build_catalog_map(family_id, params=(), check_range=True) -> AnalyticMap:
    """Instantiate a catalog family.

    Parameters outside the documented hyperbolic range raise
    :class:`NotHyperbolicError` unless ``check_range`` is false.
    """
    if isinstance(params, (int, float, complex)):
        params = (params,)
    params = tuple(params)
    if family_id not in CATALOG:
        raise UnknownFamilyError(f"unknown family {family_id!r}")
    if not CATALOG[family_id].has_evaluator:
        raise UnknownFamilyError(f"family {family_id!r} is catalogued as metadata only")
    if family_id == "exp":
        (lam,) = params
        if check_range and not 0 < _real_param(lam, "lam") < 1 / math.e:
            raise NotHyperbolicError(f"exp: lam={lam} not verified hyperbolic (need 0 < lam < 1/e)")
        return ExponentialMap(lam)
    if family_id == "tangent":
        (lam,) = params
        if check_range and not 0 < _real_param(lam, "lam") < 1:
            raise NotHyperbolicError(f"tangent: lam={lam} not verified hyperbolic (need 0 < lam < 1)")
        return TangentMap(lam)
    if family_id == "sine":
        a, b = (params + (0.0,))[:2]
        if check_range and not (0 < _real_param(a, "a") < 1 and complex(b) == 0):
            raise NotHyperbolicError(f"sine: a={a}, b={b} not verified hyperbolic")
        return SineMap(a, b)
    if family_id == "power":
        (d,) = params or (2,)
        return PowerMap(d)
    (c,) = params
    if check_range and not -0.75 < _real_param(c, "c") < 0.25:
        raise NotHyperbolicError(f"quadratic: c={c} not verified hyperbolic (need -3/4 < c < 1/4)")
    return QuadraticMap(c)


# ---------------------------------------------------------------------------
# Julia sampling and diagnostics
# ---------------------------------------------------------------------------

def _branch_choices(m: AnalyticMap, span):
    if m.finite_degree:
        return np.arange(m.degree)
    return np.arange(-span, span + 1)


def julia_chains(m: AnalyticMap, n_chains, length, seed=0, span=2):
    """Backward orbits from ``julia_seed`` with uniform random branches.

    Row ``i`` satisfies ``f(chain[i, k+1]) == chain[i, k]`` so forward
    orbits of sampled points are known exactly.
    """
    rng = np.random.default_rng(seed)
    choices = _branch_choices(m, span)
    chain = np.empty((n_chains, length + 1), dtype=np.complex128)
    chain[:, 0] = m.julia_seed
    params = m._kernel_params()
    for k in range(length):
        js = rng.choice(choices, size=n_chains)
        z = chain[:, k]
        out = np.empty(n_chains, dtype=np.complex128)
        for j in np.unique(js):
            sel = js == j
            out[sel] = kernels.branch_grid(m.family_code, params, z[sel], np.array([j]))[:, 0]
        chain[:, k + 1] = out
    return chain


def sample_julia(m: AnalyticMap, n, seed=0, depth=12, span=2):
    """``n`` Julia points: endpoints of random backward orbits."""
    return julia_chains(m, n, depth, seed=seed, span=span)[:, -1]


@dataclass
class GrowthReport:
    worst_lower_ratio: float
    worst_upper_ratio: float
    passed: bool
    n_samples: int


def verify_growth(m: AnalyticMap, samples, slack=1e-9) -> GrowthReport:
    """Check the two-sided growth bound on Julia samples."""
    z = np.atleast_1d(np.asarray(samples, dtype=np.complex128))
    if z.size == 0:
        raise ValueError("need at least one sample")
    if np.any(m.is_pole(z)):
        raise DomainError("sample at a pole")
    fz = m.eval(z)
    dz = m.deriv(z)
    if not np.all(np.isfinite(fz)):
        raise DomainError("sample with infinite image")
    if np.any(np.abs(dz) < 1e-14):
        raise DomainError("sample at a critical point")
    g = m.growth
    base = g.coefficient * np.abs(z) ** g.alpha1
    lower = np.abs(dz) / (base * np.abs(fz) ** g.alpha2_lower / g.kappa)
    upper = np.abs(dz) / (base * np.abs(fz) ** g.alpha2_upper * g.kappa)
    wl = float(lower.min())
    wu = float(upper.max())
    return GrowthReport(wl, wu, wl >= 1 - slack and wu <= 1 + slack, int(z.size))


@dataclass
class HyperbolicityReport:
    status: str  # "hyperbolic", "not hyperbolic", "inconclusive"
    delta_lower: float
    expansion_gamma: float
    expansion_c: float
    attracting_cycles: list
    messages: list = field(default_factory=list)

    @property
    def passed(self):
        return self.status == "hyperbolic"


def _find_cycle(m, z, max_period=64, tol=1e-9):
    orbit = [complex(z)]
    w = complex(z)
    for p in range(1, max_period + 1):
        w = complex(m.eval(w))
        if abs(w - orbit[0]) <= tol * (1 + abs(w)):
            pts = orbit
            mult = complex(np.prod(m.deriv(np.array(pts))))
            return AttractingCycle(p, pts, mult)
        orbit.append(w)
    return None


def verify_hyperbolic(m: AnalyticMap, budget=2000, n_samples=400, chain_length=12, seed=0, tol=1e-6):
    """Numerical hyperbolicity diagnostic.

    Singular values are iterated up to ``budget`` steps looking for
    attracting cycles; the distance from the postsingular points to sampled
    Julia points gives a lower estimate of ``delta(f)``; the expansion
    constants ``(c, gamma)`` come from the lower envelope of
    ``log|(f^n)'|`` along backward-sampled orbits.
    """
    cycles, post, messages = [], [], []
    status = "hyperbolic"
    if not m.singular_values:
        raise ValueError("map has no singular values to check")
    for v in m.singular_values:
        z = complex(v)
        orbit = [z]
        escaped = False
        with np.errstate(all="ignore"):
            for _ in range(budget):
                z = complex(m.eval(z))
                if not np.isfinite(z) or abs(z) > 1e12:
                    escaped = True
                    break
                orbit.append(z)
        if escaped:
            messages.append(f"singular value {v} escapes; no attracting cycle found")
            status = "inconclusive"
            post.extend(orbit)
            continue
        cyc = _find_cycle(m, orbit[-1])
        if cyc is None:
            messages.append(f"orbit of {v} did not settle within budget")
            status = "inconclusive"
        elif abs(cyc.multiplier) >= 1:
            messages.append(f"orbit of {v} lands on a non-attracting cycle")
            status = "not hyperbolic"
        elif not any(_same_cycle(cyc, c) for c in cycles):
            cycles.append(cyc)
        post.extend(orbit)

    chains = julia_chains(m, n_samples, chain_length, seed=seed)
    jpts = chains.ravel()
    post = np.array(post, dtype=np.complex128)
    post = post[np.isfinite(post)]
    if post.size:
        dist = np.abs(jpts[:, None] - post[None, :]).min()
        delta = float(dist / 4)
    else:
        delta = INF
    if delta < tol and status == "hyperbolic":
        status = "not hyperbolic"
        messages.append("postsingular orbit accumulates on sampled Julia points")

    # |(f^n)'(y_k)| for y_k at chain depth k: product of f' over y_k..y_{k-n+1}
    logd = np.log(np.abs(m.deriv(chains[:, 1:])))
    ns = np.arange(1, chain_length + 1)
    env = np.array([
        np.min(np.sum(logd[:, chain_length - n:], axis=1)) for n in ns
    ])
    slope = float(np.polyfit(ns, env, 1)[0])
    gamma = math.exp(slope)
    c = float(np.exp(np.min(env - ns * slope)))
    if gamma <= 1 and status == "hyperbolic":
        status = "not hyperbolic"
        messages.append("no uniform expansion on sampled orbits")
    return HyperbolicityReport(status, delta, gamma, c, cycles, messages)


def _same_cycle(a: AttractingCycle, b: AttractingCycle, tol=1e-7):
    return a.period == b.period and min(abs(p - b.points[0]) for p in a.points) < tol


def find_periodic_points(m: AnalyticMap, period, base=None, window: BranchWindow = None, tol=1e-10,
                         sweeps=60, newton_steps=8):
    """Repelling points of period dividing ``period``.

    Each depth-``period`` path of the preimage tree of ``base`` seeds a loop
    that is pulled onto the shadowing periodic orbit by nearest-preimage
    sweeps, then polished by Newton on ``f^n(z) - z``.  Duplicates are merged
    and the result sorted by modulus, then argument.
    """
    import warnings

    n = int(period)
    if n < 1:
        raise ValueError("period must be >= 1")
    if window is None:
        window = BranchWindow(max_count=m.degree or 5)
    start = m.julia_seed if base is None else complex(base)
    # paths[:, k] = node at depth k
    paths = np.array([[start]], dtype=np.complex128)
    for _ in range(n):
        bs = m.branch_set(paths[:, -1], window)
        idx, col = np.nonzero(bs.mask)
        paths = np.concatenate([paths[idx], bs.points[idx, col][:, None]], axis=1)
    guess = paths[:, :0:-1]  # c_0 = y_n, c_1 = y_{n-1}, ..., c_{n-1} = y_1
    offsets = m._candidate_offsets(window.max_count)
    with np.errstate(all="ignore"):
        loops = kernels.cycle_sweeps(m.family_code, m._kernel_params(), guess, offsets, sweeps)
        z = loops[:, 0]
        for _ in range(newton_steps):
            step = (m.iterate(z, n) - z) / (m.deriv_n(z, n) - 1)
            z = z - np.where(np.isfinite(step), step, 0)
        res = np.abs(m.iterate(z, n) - z)
        mult = np.abs(m.deriv_n(z, n))
    ok = np.isfinite(z) & (res <= tol * (1 + np.abs(z))) & (mult > 1) & (np.abs(z) <= window.max_modulus)
    z = z[ok]
    if z.size == 0:
        warnings.warn("Newton refinement failed on every seed", RuntimeWarning)
        return np.array([], dtype=np.complex128)
    out = []
    for p in z[np.lexsort((np.angle(z), _tie_round(np.abs(z))))]:
        if all(abs(p - q) > 1e-8 * (1 + abs(p)) for q in out):
            out.append(p)
    out = np.array(out)
    return out[np.lexsort((np.angle(out), _tie_round(np.abs(out))))]

"""Hot numeric kernels.

Every kernel exists twice: a loop version compiled with ``numba.njit`` and a
vectorised numpy version.  The module-level names point at the numba
version when numba is enabled (see :mod:`thermoform._accel`) and at the numpy
version otherwise; both tables are exported for tests and benchmarks.

Family codes for inverse branches:

====  =================  =========================================
code  family             branch ``j`` of ``w``
====  =================  =========================================
0     z**d + c           ``(w - c) ** (1/d) * exp(2 pi i j / d)``
1     lam * exp(z)       ``log(w / lam) + 2 pi i j``
2     lam * tan(z)       ``arctan(w / lam) + pi j``
3     sin(a z + b)       ``(pi j +- arcsin(w) - b) / a``
====  =================  =========================================

``params`` is a complex array: ``[d, c]``, ``[lam]``, ``[lam]``, ``[a, b]``.
"""

import cmath
import math

import numpy as np

from ._accel import USE_NUMBA, njit

ROOTS, EXP, TAN, SIN = 0, 1, 2, 3
TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# inverse branches
# ---------------------------------------------------------------------------

@njit(cache=True)
def _nb_branch(family, params, w, j):
    if family == ROOTS:
        d = params[0].real
        u = w - params[1]
        r = math.hypot(u.real, u.imag) ** (1.0 / d)
        a = (math.atan2(u.imag, u.real) + TWO_PI * j) / d
        return complex(r * math.cos(a), r * math.sin(a))
    if family == EXP:
        u = w / params[0]
        return complex(math.log(abs(u)), math.atan2(u.imag, u.real) + TWO_PI * j)
    if family == TAN:
        return cmath.atan(w / params[0]) + math.pi * j
    # SIN
    k = j // 2
    s = cmath.asin(w)
    if j - 2 * k == 0:
        v = s + TWO_PI * k
    else:
        v = math.pi - s + TWO_PI * k
    return (v - params[1]) / params[0]


def _np_branch(family, params, w, j):
    w = np.asarray(w, dtype=np.complex128)
    j = np.asarray(j)
    if family == ROOTS:
        d = params[0].real
        u = w - params[1]
        return np.abs(u) ** (1.0 / d) * np.exp(1j * (np.angle(u) + TWO_PI * j) / d)
    if family == EXP:
        return np.log(w / params[0]) + 1j * TWO_PI * j
    if family == TAN:
        return np.arctan(w / params[0]) + math.pi * j
    k = np.floor_divide(j, 2)
    s = np.arcsin(w)
    v = np.where(j - 2 * k == 0, s + TWO_PI * k, math.pi - s + TWO_PI * k)
    return (v - params[1]) / params[0]


@njit(cache=True)
def _nb_branch_grid(family, params, points, offsets):
    n = points.shape[0]
    m = offsets.shape[0]
    out = np.empty((n, m), dtype=np.complex128)
    for i in range(n):
        w = points[i]
        if family == EXP or family == TAN:
            # the branches differ by a lattice translate of branch 0
            base = _nb_branch(family, params, w, 0)
            step = TWO_PI if family == EXP else math.pi
            for q in range(m):
                if family == EXP:
                    out[i, q] = complex(base.real, base.imag + step * offsets[q])
                else:
                    out[i, q] = complex(base.real + step * offsets[q], base.imag)
        elif family == ROOTS:
            d = params[0].real
            u = w - params[1]
            r = math.hypot(u.real, u.imag) ** (1.0 / d)
            ph = math.atan2(u.imag, u.real)
            for q in range(m):
                a = (ph + TWO_PI * offsets[q]) / d
                out[i, q] = complex(r * math.cos(a), r * math.sin(a))
        else:
            for q in range(m):
                out[i, q] = _nb_branch(family, params, w, offsets[q])
    return out


def _np_branch_grid(family, params, points, offsets):
    return _np_branch(family, params, points[:, None], offsets[None, :])


@njit(cache=True)
def _nb_cycle_sweeps(family, params, guess, offsets, sweeps):
    """Pull loops of points onto periodic orbits.

    ``guess[i]`` is a loop ``c_0, ..., c_{n-1}`` meant to satisfy
    ``f(c_k) = c_{k+1 mod n}``; each sweep replaces ``c_k`` (from the back)
    by the preimage of ``c_{k+1}`` nearest to the current ``c_k``.
    """
    npaths, n = guess.shape
    out = guess.copy()
    m = offsets.shape[0]
    for i in range(npaths):
        for _ in range(sweeps):
            for k in range(n - 1, -1, -1):
                target = out[i, (k + 1) % n]
                best = out[i, k]
                bd = np.inf
                for q in range(m):
                    z = _nb_branch(family, params, target, offsets[q])
                    d = abs(z - out[i, k])
                    if d < bd:
                        bd = d
                        best = z
                out[i, k] = best
    return out


def _np_cycle_sweeps(family, params, guess, offsets, sweeps):
    out = guess.copy()
    n = out.shape[1]
    rows = np.arange(out.shape[0])
    for _ in range(sweeps):
        for k in range(n - 1, -1, -1):
            cand = _np_branch(family, params, out[:, (k + 1) % n][:, None], offsets[None, :])
            pick = np.argmin(np.abs(cand - out[:, k][:, None]), axis=1)
            out[:, k] = cand[rows, pick]
    return out


# ---------------------------------------------------------------------------
# lattice tail blocks:  sum_{k=a}^{b} |c + step * k| ** (-s)
# ---------------------------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _dpow(c, step, s, x):
    """d/dx |c + step x|^(-s)"""
    q = abs(c + step * x) ** 2
    dq = 2.0 * ((c.conjugate() * step).real + abs(step) ** 2 * x)
    return -0.5 * s * q ** (-0.5 * s - 1.0) * dq


_nb_dpow = njit(cache=True)(_dpow)


@njit(cache=True)
def _nb_block_sums(c, step, s, lo, hi, gl_x, gl_w):
    nb = lo.shape[0]
    out = np.empty(nb)
    for i in range(nb):
        a = lo[i]
        b = hi[i]
        if b - a < 512:
            acc = 0.0
            for k in range(a, b + 1):
                acc += abs(c + step * k) ** (-s)
            out[i] = acc
        else:
            # midpoint Euler-Maclaurin on [a-1/2, b+1/2] with the f' end correction, Gauss-Legendre in log|x|
            x0 = a - 0.5
            x1 = b + 0.5
            sgn = 1.0
            if x0 < 0.0:
                sgn = -1.0
                x0, x1 = -x1, -x0
            l0 = math.log(x0)
            l1 = math.log(x1)
            acc = 0.0
            for q in range(gl_x.shape[0]):
                lx = 0.5 * (l0 + l1) + 0.5 * (l1 - l0) * gl_x[q]
                x = math.exp(lx)
                acc += gl_w[q] * x * abs(c + step * (sgn * x)) ** (-s)
            out[i] = 0.5 * (l1 - l0) * acc - (_nb_dpow(c, step, s, sgn * x1) - _nb_dpow(c, step, s, sgn * x0)) * sgn / 24.0
    return out


def _np_block_sums(c, step, s, lo, hi, gl_x, gl_w):
    out = np.empty(lo.shape[0])
    for i, (a, b) in enumerate(zip(lo, hi)):
        if b - a < 512:
            k = np.arange(a, b + 1)
            out[i] = np.sum(np.abs(c + step * k) ** (-s))
        else:
            x0, x1, sgn = a - 0.5, b + 0.5, 1.0
            if x0 < 0:
                x0, x1, sgn = -x1, -x0, -1.0
            l0, l1 = math.log(x0), math.log(x1)
            x = np.exp(0.5 * (l0 + l1) + 0.5 * (l1 - l0) * gl_x)
            out[i] = 0.5 * (l1 - l0) * np.sum(gl_w * x * np.abs(c + step * sgn * x) ** (-s))
            out[i] -= (_dpow(c, step, s, sgn * x1) - _dpow(c, step, s, sgn * x0)) * sgn / 24.0
    return out


# ---------------------------------------------------------------------------
# barycentric interpolation rows
# ---------------------------------------------------------------------------

@njit(cache=True)
def _nb_bary_rows(nodes, weights, x):
    m = x.shape[0]
    n = nodes.shape[0]
    out = np.zeros((m, n))
    for i in range(m):
        hit = -1
        tot = 0.0
        for j in range(n):
            d = x[i] - nodes[j]
            if abs(d) < 1e-15:
                hit = j
                break
            v = weights[j] / d
            out[i, j] = v
            tot += v
        if hit >= 0:
            for j in range(n):
                out[i, j] = 0.0
            out[i, hit] = 1.0
        else:
            for j in range(n):
                out[i, j] /= tot
    return out


def _np_bary_rows(nodes, weights, x):
    d = x[:, None] - nodes[None, :]
    hit = np.abs(d) < 1e-15
    d = np.where(hit, 1.0, d)
    r = weights[None, :] / d
    r /= r.sum(axis=1, keepdims=True)
    rows = np.nonzero(hit.any(axis=1))[0]
    if rows.size:
        r[rows] = hit[rows].astype(float)
    return r


@njit(cache=True)
def _nb_trig_rows(nodes, x):
    # odd number of equispaced nodes on the circle
    m = x.shape[0]
    n = nodes.shape[0]
    out = np.zeros((m, n))
    for i in range(m):
        hit = -1
        tot = 0.0
        for j in range(n):
            h = 0.5 * (x[i] - nodes[j])
            sh = math.sin(h)
            if abs(sh) < 1e-15:
                hit = j
                break
            v = (1.0 - 2.0 * (j % 2)) / sh
            out[i, j] = v
            tot += v
        if hit >= 0:
            for j in range(n):
                out[i, j] = 0.0
            out[i, hit] = 1.0
        else:
            for j in range(n):
                out[i, j] /= tot
    return out


def _np_trig_rows(nodes, x):
    sh = np.sin(0.5 * (x[:, None] - nodes[None, :]))
    hit = np.abs(sh) < 1e-15
    sh = np.where(hit, 1.0, sh)
    sign = 1.0 - 2.0 * (np.arange(nodes.shape[0]) % 2)
    r = sign[None, :] / sh
    r /= r.sum(axis=1, keepdims=True)
    rows = np.nonzero(hit.any(axis=1))[0]
    if rows.size:
        r[rows] = hit[rows].astype(float)
    return r


# ---------------------------------------------------------------------------
# Nystrom operator assembly: M[i] = sum_s coef[i, s] * outer(ru[i, s], rv[i, s])
# ---------------------------------------------------------------------------

@njit(cache=True)
def _nb_assemble(coef, ru, rv):
    n, ns = coef.shape
    nu = ru.shape[2]
    nv = rv.shape[2]
    out = np.zeros((n, nu * nv))
    for i in range(n):
        for s in range(ns):
            c = coef[i, s]
            if c == 0.0:
                continue
            for a in range(nu):
                ca = c * ru[i, s, a]
                if ca == 0.0:
                    continue
                base = a * nv
                for b in range(nv):
                    out[i, base + b] += ca * rv[i, s, b]
    return out


def _np_assemble(coef, ru, rv):
    n = coef.shape[0]
    return np.einsum("is,isa,isb->iab", coef, ru, rv, optimize=True).reshape(n, -1)


NUMBA_KERNELS = {
    "branch_grid": _nb_branch_grid,
    "cycle_sweeps": _nb_cycle_sweeps,
    "block_sums": _nb_block_sums,
    "bary_rows": _nb_bary_rows,
    "trig_rows": _nb_trig_rows,
    "assemble": _nb_assemble,
}
NUMPY_KERNELS = {
    "branch_grid": _np_branch_grid,
    "cycle_sweeps": _np_cycle_sweeps,
    "block_sums": _np_block_sums,
    "bary_rows": _np_bary_rows,
    "trig_rows": _np_trig_rows,
    "assemble": _np_assemble,
}
KERNELS = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS


def branch_grid(family, params, points, offsets):
    """Branches ``offsets`` (int array) of every point, shape (n, m)."""
    points = np.ascontiguousarray(points, dtype=np.complex128)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    return KERNELS["branch_grid"](family, np.asarray(params, np.complex128), points, offsets)


def cycle_sweeps(family, params, guess, offsets, sweeps):
    guess = np.ascontiguousarray(guess, dtype=np.complex128)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    return KERNELS["cycle_sweeps"](family, np.asarray(params, np.complex128), guess, offsets, int(sweeps))


def block_sums(c, step, s, lo, hi):
    lo = np.ascontiguousarray(lo, dtype=np.int64)
    hi = np.ascontiguousarray(hi, dtype=np.int64)
    return KERNELS["block_sums"](complex(c), complex(step), float(s), lo, hi, _GL_X, _GL_W)


def bary_rows(nodes, weights, x):
    return KERNELS["bary_rows"](
        np.ascontiguousarray(nodes, float),
        np.ascontiguousarray(weights, float),
        np.ascontiguousarray(x, float),
    )


def trig_rows(nodes, x):
    return KERNELS["trig_rows"](np.ascontiguousarray(nodes, float), np.ascontiguousarray(x, float))


def assemble(coef, ru, rv):
    return KERNELS["assemble"](
        np.ascontiguousarray(coef, float),
        np.ascontiguousarray(ru, float),
        np.ascontiguousarray(rv, float),
    )


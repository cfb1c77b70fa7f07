"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]

Each kernel is called once untimed (numba compilation), then ``repeat``
times; the best wall time is reported together with the max abs difference
between the two backends.  A final row times a full collocation pressure
solve under both backends in subprocesses (``THERMOFORM_NUMBA=0/1``).
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from thermoform import kernels as K


def cases(scale, rng):
    n = max(8, int(2000 * scale))
    pts = rng.normal(size=n) + 1j * rng.normal(size=n) + 2.0
    offs = np.arange(-50, 51, dtype=np.int64)
    nodes = np.cos(np.pi * (np.arange(32) + 0.5) / 32)
    bw = np.sin(np.pi * (np.arange(32) + 0.5) / 32) * (-1.0) ** np.arange(32)
    x = rng.uniform(-1, 1, size=n * 10)
    tnodes = 2 * np.pi * np.arange(31) / 31 - np.pi
    lo = np.array([10 * 2 ** i for i in range(20)], np.int64)
    hi = 2 * lo - 1
    ns = 40
    coef = rng.uniform(size=(max(4, n // 4), ns))
    ru = rng.uniform(size=(coef.shape[0], ns, 32))
    rv = rng.uniform(size=(coef.shape[0], ns, 18))
    params = np.array([0.3], np.complex128)
    return {
        "branch_grid": (K.EXP, params, pts, offs),
        "cycle_sweeps": (K.ROOTS, np.array([2.0, 0.1], np.complex128),
                         np.ascontiguousarray(pts[: 256 * 12].reshape(-1, 12)) if n >= 3072 else
                         np.tile(pts[:12], (256, 1)), np.arange(2, dtype=np.int64), 30),
        "block_sums": (0.3 + 0.1j, 2j * np.pi, 1.9, lo, hi, K._GL_X, K._GL_W),
        "bary_rows": (nodes, bw, x),
        "trig_rows": (tnodes, x * np.pi),
        "assemble": (coef, ru, rv),
    }


def best_time(fn, args, repeat):
    fn(*args)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


SOLVE = (
    "import time;from thermoform.maps import build_catalog_map;"
    "from thermoform.potentials import geometric_potential;from thermoform.engines import make_model;"
    "m=build_catalog_map('exp',[0.3]);phi=geometric_potential(m,1.25);"
    "make_model(m,phi,'collocation').pressure;t0=time.perf_counter();"
    "make_model(m,phi,'collocation').pressure;print(time.perf_counter()-t0)"
)


def end_to_end(flag):
    env = dict(os.environ, THERMOFORM_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", SOLVE], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=float, default=1.0)
    ap.add_argument("--no-end-to-end", action="store_true")
    args = ap.parse_args(argv)
    if not K.USE_NUMBA:
        print("numba disabled (THERMOFORM_NUMBA=0): only numpy timings are meaningful")
    rng = np.random.default_rng(0)
    print(f"{'kernel':14s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s} {'max diff':>10s}")
    for name, a in cases(args.scale, rng).items():
        tn, on = best_time(K.NUMBA_KERNELS[name], a, args.repeat)
        tp, op = best_time(K.NUMPY_KERNELS[name], a, args.repeat)
        diff = float(np.max(np.abs(np.asarray(on) - np.asarray(op))))
        print(f"{name:14s} {1e3 * tn:11.3f} {1e3 * tp:11.3f} {tp / tn:8.2f} {diff:10.2e}")
    if not args.no_end_to_end:
        tn, tp = end_to_end("1"), end_to_end("0")
        print(f"{'exp pressure':14s} {1e3 * tn:11.1f} {1e3 * tp:11.1f} {tp / tn:8.2f} {'-':>10s}")


if __name__ == "__main__":
    main()

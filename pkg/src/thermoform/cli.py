"""Command-line frontend.

    thermoform <subcommand> [--config run.yaml] [--set a.b=value ...] [flags]

Subcommands: catalog, diagnose, pressure, gibbs, bowen, spectrum, sweep,
correlations.  Results go to stdout; with ``output.path`` (or ``--out``) the
plot-ready CSV or the JSON superset is written with a provenance header.

Exit codes: 0 ok, 2 config error, 3 not converged (artifact still written),
4 math-domain error.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from ._accel import set_threads
from .artifacts import csv_text, json_text, provenance, write_artifact
from .config import ConfigError, RunConfig, expand_grid
from .engines import default_bases, make_model
from .errors import BracketError, DomainError, EmptyLevelError, NotConvergedWarning, NotHyperbolicError, \
    UnknownFamilyError
from .maps import CATALOG, BranchWindow, build_catalog_map, sample_julia, verify_growth, verify_hyperbolic
from .multifractal import CSV_COLUMNS, bowen_dimension, parameter_sweep, spectrum, temperature_curve
from .potentials import TamePotential, observable_from_spec, select_tau
from .thermo import asymptotic_variance, fit_decay, gibbs_density, pressure

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_DOMAIN = 0, 2, 3, 4

SUBCOMMANDS = ("catalog", "diagnose", "pressure", "gibbs", "bowen", "spectrum", "sweep", "correlations")

# frozen column orders of the plot-ready CSVs
COLUMNS = {
    "catalog": ("family", "formula", "hyperbolic_range", "order", "alpha1", "alpha2", "evaluator"),
    "diagnose": ("check", "passed", "value"),
    "pressure": ("base_re", "base_im", "pressure"),
    "gibbs": ("re", "im", "density"),
    "bowen": ("h", "residual", "tau", "tau_position"),
    "spectrum": CSV_COLUMNS,
    "sweep": ("param", "value"),
    "correlations": ("k", "C"),
}


@dataclass
class Outcome:
    rows: list
    result: dict
    lines: list = field(default_factory=list)
    converged: bool = True


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _map(cfg: RunConfig):
    return build_catalog_map(cfg.map["family"], cfg.map.get("params", []))


def _potential(m, cfg: RunConfig):
    p = cfg.potential
    t = float(p["t"])
    tau = p.get("tau", "auto")
    if tau == "auto":
        tau = 0.0 if m.finite_degree else select_tau(m, t, cfg.analysis["tau_position"])
    return TamePotential(t, float(tau), observable_from_spec(p.get("h", "zero")))


def _opts(m, cfg: RunConfig):
    s = cfg.solver
    opts = {"engine": s["engine"]}
    if s["depth"]:
        opts["depth"] = int(s["depth"])
    if not m.finite_degree:
        opts["window"] = BranchWindow(max_count=int(s["window"]))
    return opts


def _bases(m, cfg: RunConfig):
    return default_bases(m, int(cfg.solver["bases"]), seed=int(cfg.solver["seed"] or 0))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_catalog(cfg: RunConfig) -> Outcome:
    rows, fams, lines = [], {}, []
    for fid, info in CATALOG.items():
        g = info.growth
        a2 = g.get("alpha2", g.get("alpha2_lower"))
        rows.append((fid, info.formula, info.hyperbolic_range, g.get("order"), g.get("alpha1"), a2,
                     info.has_evaluator))
        fams[fid] = {"formula": info.formula, "hyperbolic_range": info.hyperbolic_range, "growth": dict(g),
                     "evaluator": info.has_evaluator, "params": list(info.param_names)}
        lines.append(f"{fid:12s} {info.formula:34s} rho={g.get('order')}  alpha1={g.get('alpha1')}  "
                     f"alpha2={a2}")
    return Outcome(rows, {"families": fams}, lines)


def cmd_diagnose(cfg: RunConfig) -> Outcome:
    m = _map(cfg)
    seed = int(cfg.solver["seed"] or 0)
    gr = verify_growth(m, sample_julia(m, 200, seed=seed))
    hy = verify_hyperbolic(m, seed=seed)
    rows = [
        ("growth_lower", gr.passed, gr.worst_lower_ratio),
        ("growth_upper", gr.passed, gr.worst_upper_ratio),
        ("hyperbolic_delta", hy.passed, hy.delta_lower),
        ("expansion_gamma", hy.passed, hy.expansion_gamma),
    ]
    result = {"map": m.describe(), "growth_profile": m.growth.as_dict(), "growth": gr.__dict__,
              "hyperbolicity": {"status": hy.status, "delta_lower": hy.delta_lower,
                                "expansion_gamma": hy.expansion_gamma, "expansion_c": hy.expansion_c,
                                "attracting_cycles": [c.__dict__ for c in hy.attracting_cycles],
                                "messages": hy.messages}}
    lines = [f"growth bound: {'ok' if gr.passed else 'FAILED'} "
             f"(worst ratios {gr.worst_lower_ratio:.6g}, {gr.worst_upper_ratio:.6g})",
             f"hyperbolicity: {hy.status} (delta {hy.delta_lower:.6g}, gamma {hy.expansion_gamma:.6g})"]
    return Outcome(rows, result, lines, gr.passed and hy.passed)


def cmd_pressure(cfg: RunConfig) -> Outcome:
    m = _map(cfg)
    phi = _potential(m, cfg)
    opts = _opts(m, cfg)
    n = opts.pop("depth", None)
    est = pressure(m, phi, bases=_bases(m, cfg), n=n, tol=cfg.solver["tolerances"]["pressure"], **opts)
    rows = [(float(np.real(b)), float(np.imag(b)), v) for b, v in zip(est.base_points, est.per_base)]
    lines = [f"P = {est.value:.6f}", f"spread = {est.spread:.3g} over {len(est.per_base)} base points "
                                      f"({est.engine}, depth {est.depth})"]
    return Outcome(rows, {"potential": phi.as_dict(), "pressure": est.as_dict()}, lines, est.converged)


def cmd_gibbs(cfg: RunConfig) -> Outcome:
    m = _map(cfg)
    phi = _potential(m, cfg)
    opts = _opts(m, cfg)
    model = make_model(m, phi, **opts)
    prof = gibbs_density(m, phi, model=model, tol=cfg.solver["tolerances"]["density"])
    psi = observable_from_spec(cfg.analysis["psi"])
    E = float(model.expectation(psi))
    rows = [(float(np.real(z)), float(np.imag(z)), float(v)) for z, v in zip(prof.grid, prof.values)]
    result = {"potential": phi.as_dict(), "pressure": float(model.pressure), "expectation": E,
              "observable": psi.name, "density_residual": prof.residual, "decay_slope": prof.decay_slope,
              "expected_slope": prof.expected_slope, "engine": model.engine}
    lines = [f"P = {model.pressure:.6f}", f"E[{psi.name}] = {E:.6f}",
             f"density residual = {prof.residual:.3g}"]
    return Outcome(rows, result, lines, not prof.flagged)


def cmd_bowen(cfg: RunConfig) -> Outcome:
    m = _map(cfg)
    opts = _opts(m, cfg)
    opts.pop("depth", None)
    res = bowen_dimension(m, tol=cfg.solver["tolerances"]["root"], **opts)
    ok = abs(res.residual) <= cfg.solver["tolerances"]["bowen"]
    rows = [(res.h, res.residual, res.tau, res.tau_position)]
    result = {"h": res.h, "residual": res.residual, "tau": res.tau, "tau_position": res.tau_position,
              "samples": res.samples}
    return Outcome(rows, result, [f"h = {res.h:.6f}"], ok)


def cmd_spectrum(cfg: RunConfig) -> Outcome:
    m = _map(cfg)
    phi = _potential(m, cfg)
    opts = _opts(m, cfg)
    opts.pop("depth", None)
    q = expand_grid(cfg.analysis["q_grid"])
    curve = temperature_curve(m, phi, q, **opts)
    sp = spectrum(curve)
    checks = curve.checks()
    if sp.degenerate:
        i = int(np.argmin(np.abs(curve.q)))
        idx = [i]
        alpha, F = [sp.alpha[0]], [sp.F[0]]
    else:
        idx = range(curve.q.size)
        alpha, F = sp.alpha, sp.F
    rows = [(curve.q[i], curve.T[i], curve.T1_analytic[i], curve.T1_fd[i], curve.T2[i], a, f)
            for i, a, f in zip(idx, alpha, F)]
    ok = checks["decreasing"] and checks["convex"] and checks["T1_routes"] <= 1 and sp.legendre_ok and sp.concave
    lines = [f"alpha range = [{sp.alpha_range[0]:.6f}, {sp.alpha_range[1]:.6f}]",
             f"F(q=0) = T(0) = {float(curve.T[int(np.argmin(np.abs(curve.q)))]):.6f}"]
    lines.extend(sp.notes)
    result = {"potential": curve.potential, "normalization": curve.normalization, "checks": checks,
              "legendre_ok": sp.legendre_ok, "concave": sp.concave, "degenerate": sp.degenerate,
              "alpha_range": list(sp.alpha_range), "notes": sp.notes,
              "curve": {"q": curve.q, "T": curve.T, "T1_analytic": curve.T1_analytic, "T1_fd": curve.T1_fd,
                        "T2": curve.T2, "alpha": curve.alpha, "F": curve.F, "chi": curve.chi,
                        "variance": curve.variance}}
    return Outcome(rows, result, lines, ok)


def cmd_sweep(cfg: RunConfig) -> Outcome:
    grid = expand_grid(cfg.analysis["param_grid"])
    if grid is None:
        raise ConfigError("sweep needs a parameter grid", "analysis.param_grid")
    what = cfg.analysis["what"]
    opts = {"engine": cfg.solver["engine"]}
    q = expand_grid(cfg.analysis["q_grid"]) if what == "spectrum" else None
    tab = parameter_sweep(cfg.map["family"], grid, what=what, q_grid=q,
                          phi_t=float(cfg.potential["t"]) if what == "spectrum" else None, **opts)
    rows = list(zip(tab.params, tab.values))
    lines = [f"{p:.6g}  {v:.6f}" for p, v in rows]
    lines.append(f"smoothness residual = {tab.smoothness:.3g} of range")
    for fl in tab.flagged:
        lines.append(f"skipped {fl['params']}: {fl['reason']}")
    result = {"family": tab.family, "what": what, "params": tab.params, "values": tab.values,
              "flagged": tab.flagged, "smoothness": tab.smoothness, "rows": tab.rows}
    return Outcome(rows, result, lines, not tab.flagged)


def cmd_correlations(cfg: RunConfig) -> Outcome:
    m = _map(cfg)
    phi = _potential(m, cfg)
    opts = _opts(m, cfg)
    model = make_model(m, phi, **opts)
    psi = observable_from_spec(cfg.analysis["psi"])
    kmax = int(cfg.analysis["kmax"])
    var = asymptotic_variance(m, phi, psi, K=kmax, model=model)
    C = var.correlations
    xi = fit_decay(np.abs(C[1:]), start=(C.size - 1) // 2) if C.size > 2 else float("nan")
    rows = [(k, float(c)) for k, c in enumerate(C)]
    lines = [f"xi = {xi:.6f}", f"sigma^2 = {var.value:.6g} (remainder {var.remainder:.3g})"]
    result = {"potential": phi.as_dict(), "observable": psi.name, "correlations": C, "xi": xi,
              "variance": var.value, "remainder": var.remainder, "reliable": var.reliable}
    return Outcome(rows, result, lines, var.reliable and xi < 1)


HANDLERS = {
    "catalog": cmd_catalog,
    "diagnose": cmd_diagnose,
    "pressure": cmd_pressure,
    "gibbs": cmd_gibbs,
    "bowen": cmd_bowen,
    "spectrum": cmd_spectrum,
    "sweep": cmd_sweep,
    "correlations": cmd_correlations,
}


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="thermoform", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"thermoform {__version__}")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("-c", "--config", help="YAML run configuration")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config leaf, e.g. solver.depth=12 (repeatable)")
    p.add_argument("--mode", choices=("deterministic", "fast"))
    p.add_argument("--seed", type=int)
    p.add_argument("--engine", choices=("auto", "tree", "collocation"))
    p.add_argument("--family")
    p.add_argument("--params", type=float, nargs="+")
    p.add_argument("-t", "--t", dest="t", type=float, help="potential exponent")
    p.add_argument("--out", help="artifact path (output.path)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("-q", "--quiet", action="store_true", help="suppress stdout results")
    return p


def _flag_overrides(args):
    out = []
    for key, val in (("solver.mode", args.mode), ("solver.seed", args.seed), ("solver.engine", args.engine),
                     ("map.family", args.family), ("potential.t", args.t), ("output.path", args.out),
                     ("output.format", args.format)):
        if val is not None:
            out.append(f"{key}={val}")
    if args.params is not None:
        out.append("map.params=[" + ", ".join(repr(float(x)) for x in args.params) + "]")
    return out


def load(args) -> RunConfig:
    overrides = _flag_overrides(args) + list(args.overrides)
    if args.config:
        return RunConfig.load(args.config, overrides)
    return RunConfig.from_dict({}, overrides)


def emit(cfg: RunConfig, subcommand, out: Outcome):
    path = cfg.output.get("path")
    if not path:
        return None
    prov = provenance(cfg, subcommand)
    prov["converged"] = bool(out.converged)
    if cfg.output["format"] == "json":
        text = json_text(prov, {**out.result, "columns": list(COLUMNS[subcommand]), "rows": out.rows})
    else:
        text = csv_text(prov, COLUMNS[subcommand], out.rows)
    return write_artifact(path, text)


def run(subcommand, cfg: RunConfig, stdout=None, stderr=None, quiet=False):
    """Run one subcommand; returns the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    if cfg.deterministic:
        set_threads(1)
    else:
        set_threads()
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            out = HANDLERS[subcommand](cfg)
    except (ConfigError, UnknownFamilyError) as exc:
        print(f"config error: {exc}", file=stderr)
        return EXIT_CONFIG
    except (DomainError, NotHyperbolicError, BracketError, EmptyLevelError) as exc:
        print(f"math-domain error: {exc}", file=stderr)
        return EXIT_DOMAIN
    flagged = [w for w in caught if issubclass(w.category, NotConvergedWarning)]
    for w in caught:
        print(f"warning: {w.message}", file=stderr)
    if flagged:
        out.converged = False
    path = emit(cfg, subcommand, out)
    if not quiet:
        for line in out.lines:
            print(line, file=stdout)
    if path:
        print(f"wrote {path}", file=stderr)
    if not out.converged:
        print("not converged: see flags in the artifact", file=stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(args.subcommand, cfg, quiet=args.quiet)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

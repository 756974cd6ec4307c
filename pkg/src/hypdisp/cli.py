"""Command-line driver: ``hypdisp <command> [--config file.json] [--out dir] [flags]``.

Every command writes ``<out>/<command>.csv`` and
``<out>/<command>.summary.json``; the process exits nonzero when any check
fails (1) or the configuration is invalid (2).
"""
from __future__ import annotations

import argparse
import csv
from concurrent.futures import ThreadPoolExecutor
import json
import math
import os
from pathlib import Path
import sys
import time

import numpy as np

from . import groups, lorentz, oscillatory, solver, transform
from .quadrature import loglog_slope
from .specfun import GeometryParams

COMMANDS = ("transform-selfcheck", "kernel-scan", "dispersive-fit", "bounds-check",
            "lorentz-check", "solve", "scatter", "stability", "exponents")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

# defaults shared by all commands; per-command grid defaults follow
DEFAULTS = {
    "n": 3, "r_max": None, "n_r": None, "lam_max": None, "n_lam": None, "lam_layout": None,
    "b": 3.0, "alpha2": 1.0, "h": 0.0, "T": 256.0, "epsilon": 0.1, "picard_tol": 1e-10,
    "picard_max_iter": 30, "amplitude": 1e-3, "width": None, "q": 4.0, "t": None, "r": None,
    "k": "1,2,3", "tol": 1e-8, "fit_range": "4:64", "seed": 0, "which": "all",
    "perturbation": 0.1, "no_timing": False,
}

GRID_DEFAULTS = {
    "transform-selfcheck": (12.0, 512, 24.0, 512, "uniform"),
    "kernel-scan": (None, None, None, None, None),
    "dispersive-fit": (20.0, 512, 12.0, 4096, "graded"),
    "dispersive-fit-small": (10.0, 1024, 160.0, 2048, "uniform"),
    "bounds-check": (None, None, None, None, None),
    "lorentz-check": (20.0, 512, 16.0, 512, "uniform"),
    "solve": (20.0, 512, 12.0, 4096, "graded"),
    "scatter": (20.0, 512, 12.0, 4096, "graded"),
    "stability": (20.0, 512, 12.0, 4096, "graded"),
    "exponents": (None, None, None, None, None),
}

# constant of the second-derivative van der Corput lemma
VDC_CONSTANT = 8.0

T_DEFAULTS = {"kernel-scan": "1:50:8", "dispersive-fit": "10:100:16", "bounds-check": "1:50:8"}


def parse_range(text, geometric=True):
    """``"a:b:k"`` (``k`` points, geometric when ``a > 0``) or ``"x,y,z"``."""
    if isinstance(text, (list, tuple)):
        vals = np.asarray(text, dtype=float)
    else:
        text = str(text).strip()
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ConfigError(f"range {text!r} must read start:stop:points")
            a, b, k = float(parts[0]), float(parts[1]), int(parts[2])
            if k < 1 or b < a:
                raise ConfigError(f"range {text!r} is empty")
            if k == 1:
                vals = np.array([a])
            elif geometric and a > 0:
                vals = np.geomspace(a, b, k)
            else:
                vals = np.linspace(a, b, k)
        else:
            vals = np.array([float(x) for x in text.split(",") if x.strip()])
    if vals.size == 0:
        raise ConfigError("empty sweep range")
    return vals


def _power_of_two(name, v):
    if v is None:
        return
    if not (64 <= v <= 4096 and v & (v - 1) == 0):
        raise ConfigError(f"{name} = {v} must be a power of two between 2^6 and 2^12")


def resolve_config(command, file_cfg, flags):
    cfg = dict(DEFAULTS)
    for source in (file_cfg, flags):
        for key, val in source.items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown configuration key {key!r}")
            if val is not None:
                cfg[key] = val
    cfg["command"] = command
    if cfg["n"] < 2:
        raise ConfigError("n >= 2 required")
    for name in ("n_r", "n_lam"):
        _power_of_two(name, cfg[name])
    return cfg


def _grid(cfg, key=None):
    r_max, n_r, lam_max, n_lam, layout = GRID_DEFAULTS[key or cfg["command"]]
    r_max = cfg["r_max"] if cfg["r_max"] is not None else r_max
    n_r = cfg["n_r"] if cfg["n_r"] is not None else n_r
    lam_max = cfg["lam_max"] if cfg["lam_max"] is not None else lam_max
    n_lam = cfg["n_lam"] if cfg["n_lam"] is not None else n_lam
    layout = cfg["lam_layout"] or layout
    _power_of_two("n_r", n_r)
    _power_of_two("n_lam", n_lam)
    return r_max, n_r, lam_max, n_lam, layout


def build_plan(cfg, key=None, n=None):
    r_max, n_r, lam_max, n_lam, layout = _grid(cfg, key)
    g = GeometryParams(n or cfg["n"])
    if layout == "graded":
        # half the nodes on the first quarter, a quarter on each of the next pieces
        segs = [(lam_max / 4, n_lam // 2), (lam_max / 2, n_lam // 4), (lam_max, n_lam // 4)]
        return transform.make_plan(g, r_max=r_max, n_r=n_r, lam_segments=segs)
    if layout != "uniform":
        raise ConfigError(f"unknown lam_layout {layout!r}")
    return transform.make_plan(g, r_max=r_max, n_r=n_r, lam_max=lam_max, n_lam=n_lam)


def pool_size(flag):
    if flag:
        return int(flag)
    env = os.environ.get("HYPDISP_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# commands; each returns (columns, rows, checks, results)
# ---------------------------------------------------------------------------

def _check(name, value, bound, ok):
    return {"name": name, "value": _jsonable(value), "bound": _jsonable(bound), "pass": bool(ok)}


def cmd_transform_selfcheck(cfg, pmap):
    plan = build_plan(cfg)
    r = plan.rgrid.nodes
    profiles = {
        "gauss": np.exp(-r ** 2),
        "wide_gauss": np.exp(-r ** 2 / 4),
        "sech2": 1 / np.cosh(r) ** 2 * np.exp(-r ** 2 / 8),
        "poly_gauss": (1 + r ** 2) * np.exp(-r ** 2),
        "cos_gauss": np.cos(2 * r) * np.exp(-r ** 2 / 2),
    }
    rows = []
    for name, vals in profiles.items():
        f = transform.RadialFunction(plan.rgrid, vals)
        rows.append([name, transform.roundtrip_error(f, plan), transform.plancherel_error(f, plan)])
    worst_rt = max(rw[1] for rw in rows)
    worst_pl = max(rw[2] for rw in rows)
    checks = [_check("roundtrip", worst_rt, 1e-5, worst_rt < 1e-5),
              _check("plancherel", worst_pl, 1e-6, worst_pl < 1e-6)]
    return ["profile", "roundtrip_error", "plancherel_error"], rows, checks, {}


def cmd_kernel_scan(cfg, pmap):
    g = GeometryParams(cfg["n"])
    ts = parse_range(cfg["t"] or T_DEFAULTS["kernel-scan"])
    rs = parse_range(cfg["r"] or "0.1:10:50", geometric=False)
    res = list(pmap(lambda t: oscillatory.kernel_profile(t, rs, g, cfg["tol"]), ts))
    rows = []
    for t, kr in zip(ts, res):
        for r, v, e in zip(rs, np.atleast_1d(kr.value), np.atleast_1d(kr.est_error)):
            rows.append([t, r, v.real, v.imag, abs(v), e])
    conv = all(kr.converged for kr in res)
    return (["t", "r", "re", "im", "abs", "est_error"], rows,
            [_check("converged", conv, True, conv)], {})


def cmd_dispersive_fit(cfg, pmap):
    g = GeometryParams(cfg["n"])
    q = float(cfg["q"])
    ts = parse_range(cfg["t"] or T_DEFAULTS["dispersive-fit"])
    if ts.size < 2:
        raise ConfigError("a fit needs at least two times")
    checks, results = [], {}
    if np.min(ts) >= 1:
        def norm(t):
            prof = lambda r: np.abs(oscillatory.kernel_profile(t, r, g, cfg["tol"]).value)
            return lorentz.lq_norm_radial(prof, q, g, 30.0).value
        norms = list(pmap(norm, ts))
        slope = loglog_slope(ts, norms)
        checks.append(_check("large_time_slope", slope, [-1.6, -1.4], abs(slope + 1.5) <= 0.1))
        results = {"slope": slope, "expected": -1.5}
        return ["t", "kernel_norm"], [[t, v] for t, v in zip(ts, norms)], checks, results
    if np.max(ts) <= 1:
        plan = build_plan(cfg, "dispersive-fit-small")
        scan = groups.small_time_scan(q, ts, plan, map_fn=pmap)
        exp = scan["expected"]
        checks.append(_check("small_time_slope", scan["slope"], [exp - 0.15, exp + 0.15],
                             abs(scan["slope"] - exp) <= 0.15))
        rows = [[rw["t"], rw["ratio"], rw["c"]] for rw in scan["rows"]]
        return ["t", "operator_ratio", "probe_width"], rows, checks, {
            "slope": scan["slope"], "expected": exp}
    raise ConfigError("the t range must lie entirely in (0, 1] or in [1, inf)")


def cmd_bounds_check(cfg, pmap):
    g = GeometryParams(cfg["n"])
    which = cfg["which"]
    rows, checks, results = [], [], {}
    if which in ("all", "vdc"):
        # r = 0, and r placing the stationary point at lam = 1.25 for every t
        amp = oscillatory.smooth_bump(0.5, 2.0)
        worst = 0.0
        for t in (1.0, 10.0, 100.0, 1000.0):
            for r in (0.0, t * float(oscillatory.dpsi(1.25, g))):
                out = oscillatory.vdc_bound_check(amp, (0.5, 2.0), [t], r, g)
                _, lhs, rhs, ratio = out["rows"][0]
                rows.append(["vdc", t, r, 0, lhs, rhs, ratio])
                worst = max(worst, ratio)
        checks.append(_check("vdc_bounded", worst, VDC_CONSTANT, worst <= VDC_CONSTANT))
        results["vdc_max_ratio"] = worst
    if which in ("all", "nonstationary"):
        amp = lambda x: oscillatory.smooth_bump(0.5, 2.0)(np.abs(x))
        ts = 2.0 ** np.arange(0, 10)
        ks = [int(k) for k in str(cfg["k"]).split(",")]
        for k in ks:
            ratios = []
            for t in ts:
                out = oscillatory.nonstationary_bound_check(amp, t, 0.0, k, g)
                rows.append(["nonstationary", t, 0.0, k, out["lhs"], out["rhs"], out["ratio"]])
                ratios.append(out["ratio"])
            slope = loglog_slope(ts, ratios)
            checks.append(_check(f"nonstationary_k{k}_trend", slope, 0.0, slope <= 0))
            checks.append(_check(f"nonstationary_k{k}_bounded", max(ratios), 1.0, max(ratios) <= 1))
    if which in ("all", "kernel"):
        ts = parse_range(cfg["t"] or T_DEFAULTS["bounds-check"])
        rs = parse_range(cfg["r"] or "0.1:10:25", geometric=False)
        out = oscillatory.kernel_bound_check(ts, rs, g, tol=cfg["tol"], map_fn=pmap)
        for t, row in zip(out["t"], out["ratios"]):
            rows.append(["kernel", t, float(np.argmax(row)), 0, float(np.max(row)), out["c_hat"],
                         float(np.max(row)) / out["c_hat"]])
        ok = math.isfinite(out["c_hat"]) and out["relative_change"] < 0.1
        checks.append(_check("kernel_c_hat_stable", out["relative_change"], 0.1, ok))
        results["c_hat"] = out["c_hat"]
    if not checks:
        raise ConfigError(f"unknown bound family {which!r}")
    return ["kind", "t", "r", "k", "lhs", "rhs", "ratio"], rows, checks, results


def cmd_lorentz_check(cfg, pmap):
    plan = build_plan(cfg)
    g = plan.geometry
    r = plan.rgrid.nodes
    meas = plan.rgrid.measure
    f = transform.RadialFunction(plan.rgrid, np.exp(-r ** 2 / 2))
    h = transform.RadialFunction(plan.rgrid, np.exp(-r) / (1 + r))
    rows, checks = [], []
    # closed form vs rearrangement for a decreasing profile
    worst, ratios = 0.0, []
    for p, d in ((2.0, 2.0), (4.0 / 3.0, math.inf), (3.0, 1.0), (4.0, 2.0)):
        lp = lorentz.LorentzParams(p, d)
        exact = lorentz.lorentz_from_samples(f.values, meas, p, d, warn=False)
        mono = lorentz.lorentz_norm_monotone(f, lp).value
        rows.append(["monotone_vs_rearranged", p, d, mono, exact, mono / exact])
        ratios.append(mono / exact)
    # the two-piece formula is an equivalent norm, not an equal one
    checks.append(_check("monotone_equivalence", [min(ratios), max(ratios)], [0.1, 10.0],
                         min(ratios) >= 0.1 and max(ratios) <= 10.0))
    # Hoelder: ||f g|| <= 2^{1/p3} ||f|| ||g||
    for p1, d1, p2, d2 in ((4.0, 2.0, 4.0, 2.0), (3.0, math.inf, 6.0, 2.0), (2.5, 1.0, 5.0, 4.0)):
        out = lorentz.holder_check(f, h, p1, d1, p2, d2)
        bound = 2 ** (1 / out["p3"])
        rows.append(["holder", out["p3"], out["d3"], out["lhs"], out["rhs"], out["ratio"]])
        worst = max(worst, out["ratio"] / bound)
    checks.append(_check("holder", worst, 1.0, worst <= 1.0))
    # inclusion: ||f||_{(p,d2)} <= (d1/p)^{1/d1 - 1/d2} ||f||_{(p,d1)}
    worst_inc = 0.0
    for p, d1, d2 in ((2.0, 1.0, 2.0), (3.0, 2.0, math.inf), (4.0 / 3.0, 1.0, math.inf)):
        a = lorentz.lorentz_from_samples(f.values, meas, p, d1, warn=False)
        b = lorentz.lorentz_from_samples(f.values, meas, p, d2, warn=False)
        c = (d1 / p) ** (1 / d1 - (0 if math.isinf(d2) else 1 / d2))
        rows.append(["inclusion", p, d1 if math.isfinite(d2) else d1, b, c * a, b / (c * a)])
        worst_inc = max(worst_inc, b / (c * a))
    checks.append(_check("inclusion", worst_inc, 1.0, worst_inc <= 1.0 + 1e-12))
    return ["kind", "p", "d", "lhs", "rhs", "ratio"], rows, checks, {}


def _solver_params(cfg, plan):
    return solver.SolverParams(plan.geometry, float(cfg["b"]), alpha2=float(cfg["alpha2"]),
                               h=float(cfg["h"]), T=float(cfg["T"]), epsilon=float(cfg["epsilon"]),
                               picard_tol=float(cfg["picard_tol"]),
                               picard_max_iter=int(cfg["picard_max_iter"]))


def _solve(cfg):
    plan = build_plan(cfg)
    params = _solver_params(cfg, plan)
    data = solver.gaussian_data(plan, float(cfg["amplitude"]), float(cfg["width"] or 2.0))
    traj = solver.picard_solve(data, params, plan)
    return plan, params, traj


def _solve_checks(params, traj):
    ratio = max(traj.ratios) if traj.ratios else 0.0
    wn = solver.weighted_norm(traj)
    return [
        _check("contraction_ratio", ratio, 0.5, ratio < 0.5 and traj.iterations <= 8),
        _check("weighted_norm_over_e0", wn / traj.e0 if traj.e0 else 0.0, 2.0,
               wn <= 2 * traj.e0),
        _check("residual", traj.residual, 10 * params.picard_tol,
               traj.residual < 10 * params.picard_tol),
    ], wn


def cmd_solve(cfg, pmap):
    plan, params, traj = _solve(cfg)
    arr = np.stack([np.stack([s.u_hat.values, s.w_hat.values]) for s in traj.states])
    norms = solver.x_norms(arr, plan, params.p, params.d)
    checks, wn = _solve_checks(params, traj)
    results = {"e0": traj.e0, "weighted_norm": wn, "iterations": traj.iterations,
               "history": traj.weighted_norm_history, "ratios": traj.ratios,
               "residual": traj.residual}
    return ["t", "x_norm"], [[t, v] for t, v in zip(traj.times, norms)], checks, results


def cmd_scatter(cfg, pmap):
    plan, params, traj = _solve(cfg)
    lo, hi = parse_range(cfg["fit_range"].replace(":", ",") if isinstance(cfg["fit_range"], str)
                         else cfg["fit_range"])[:2]
    rep = solver.scattering_state(traj, fit_range=(lo, hi))
    bound = -params.b * params.alpha2 + 0.2
    checks, _ = _solve_checks(params, traj)
    checks.append(_check("scattering_exponent", rep.exponent, bound, rep.exponent <= bound))
    checks.append(_check("construction_residual", rep.construction_residual, 1e-12,
                         rep.construction_residual < 1e-12))
    results = {"exponent": rep.exponent, "tail_estimate": rep.tail_estimate,
               "fit_range": [lo, hi]}
    rows = [[t, v] for t, v in zip(rep.times, rep.difference_norms)]
    return ["t", "difference_norm"], rows, checks, results


def cmd_stability(cfg, pmap):
    plan = build_plan(cfg)
    params = _solver_params(cfg, plan)
    # narrower data reach the large-time regime within the horizon
    amp, width = float(cfg["amplitude"]), float(cfg["width"] or 1.0)
    d1 = solver.gaussian_data(plan, amp, width)
    d2 = solver.gaussian_data(plan, amp * (1 + float(cfg["perturbation"])), width, velocity=True)
    rep = solver.stability_experiment(d1, d2, params, plan, map_fn=pmap)
    same = solver.stability_experiment(d1, d1, params, plan, map_fn=pmap)
    zero = not np.any(same.nonlinear) and not np.any(same.linear)
    checks = [
        _check("nonlinear_decreasing", rep.slope_nonlinear, 0.0, rep.nonlinear_decreasing),
        _check("linear_decreasing", rep.slope_linear, 0.0, rep.linear_decreasing),
        _check("equivalence", rep.equivalent, True, rep.equivalent),
        _check("zero_difference", zero, True, zero),
    ]
    rows = [[t, a, b] for t, a, b in zip(rep.times, rep.nonlinear, rep.linear)]
    return ["t", "nonlinear", "linear"], rows, checks, {
        "slope_nonlinear": rep.slope_nonlinear, "slope_linear": rep.slope_linear}


def cmd_exponents(cfg, pmap):
    ex = solver.exponents(float(cfg["b"]), int(cfg["n"]))
    ident = ex.beta + (cfg["b"] - 1) * ex.alpha1
    checks = [_check("beta_alpha1_identity", ident, 1.0, abs(ident - 1) <= 1e-15)]
    results = {"beta": ex.beta, "alpha1": ex.alpha1, "b0": ex.b0, "b1": ex.b1, "mode": ex.mode}
    row = [ex.beta, ex.alpha1, ex.b0, ex.b1, ex.mode]
    return ["beta", "alpha1", "b0", "b1", "mode"], [row], checks, results


HANDLERS = {
    "transform-selfcheck": cmd_transform_selfcheck,
    "kernel-scan": cmd_kernel_scan,
    "dispersive-fit": cmd_dispersive_fit,
    "bounds-check": cmd_bounds_check,
    "lorentz-check": cmd_lorentz_check,
    "solve": cmd_solve,
    "scatter": cmd_scatter,
    "stability": cmd_stability,
    "exponents": cmd_exponents,
}


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        # JSON has no infinities or NaN
        return v if math.isfinite(v) else None
    return v


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_outputs(out_dir, command, columns, rows, summary):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{command}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    with open(out / f"{command}.summary.json", "w") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")


def build_parser():
    ap = argparse.ArgumentParser(prog="hypdisp", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON file with configuration keys")
    ap.add_argument("--out", default="hypdisp_out", help="output directory")
    ap.add_argument("--threads", type=int, help="worker pool size")
    ap.add_argument("--n", type=int)
    ap.add_argument("--r-max", dest="r_max", type=float)
    ap.add_argument("--n-r", dest="n_r", type=int)
    ap.add_argument("--lam-max", dest="lam_max", type=float)
    ap.add_argument("--n-lam", dest="n_lam", type=int)
    ap.add_argument("--lam-layout", dest="lam_layout", choices=("uniform", "graded"))
    ap.add_argument("--b", type=float)
    ap.add_argument("--alpha2", type=float)
    ap.add_argument("--h", type=float)
    ap.add_argument("--T", type=float)
    ap.add_argument("--epsilon", type=float)
    ap.add_argument("--picard-tol", dest="picard_tol", type=float)
    ap.add_argument("--picard-max-iter", dest="picard_max_iter", type=int)
    ap.add_argument("--amplitude", type=float)
    ap.add_argument("--width", type=float)
    ap.add_argument("--perturbation", type=float)
    ap.add_argument("--q", type=float)
    ap.add_argument("--t", help="time sweep start:stop:points or a comma list")
    ap.add_argument("--r", help="radius sweep start:stop:points or a comma list")
    ap.add_argument("--k", help="comma list of derivative orders")
    ap.add_argument("--tol", type=float)
    ap.add_argument("--fit-range", dest="fit_range")
    ap.add_argument("--which", choices=("all", "vdc", "nonstationary", "kernel"))
    ap.add_argument("--seed", type=int)
    ap.add_argument("--no-timing", dest="no_timing", action="store_const", const=True,
                    help="write wall_time_s as null for byte-identical summaries")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    flags = {k: v for k, v in vars(args).items()
             if k not in ("command", "config", "out", "threads") and v is not None}
    try:
        file_cfg = {}
        if args.config:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
            if not isinstance(file_cfg, dict):
                raise ConfigError("config file must hold a JSON object")
            file_cfg.pop("command", None)
        cfg = resolve_config(args.command, file_cfg, flags)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"hypdisp: configuration error: {exc}", file=sys.stderr)
        return 2

    np.random.seed(int(cfg["seed"]))
    workers = pool_size(args.threads)
    start = time.perf_counter()
    try:
        if workers > 1:
            with ThreadPoolExecutor(workers) as ex:
                columns, rows, checks, results = HANDLERS[args.command](cfg, ex.map)
        else:
            columns, rows, checks, results = HANDLERS[args.command](cfg, map)
    except (ConfigError, solver.ModeError, ValueError) as exc:
        print(f"hypdisp: configuration error: {exc}", file=sys.stderr)
        return 2
    elapsed = time.perf_counter() - start
    echo = {k: v for k, v in cfg.items() if k != "no_timing"}
    summary = {
        "command": args.command,
        "config": echo,
        "wall_time_s": None if cfg["no_timing"] else elapsed,
        "checks": checks,
        "failures": [c["name"] for c in checks if not c["pass"]],
        "results": results,
    }
    write_outputs(args.out, args.command, columns, rows, summary)
    for c in checks:
        print(f"{'PASS' if c['pass'] else 'FAIL'}  {c['name']}: {c['value']} (bound {c['bound']})")
    return 0 if all(c["pass"] for c in checks) else 1


if __name__ == "__main__":
    sys.exit(main())

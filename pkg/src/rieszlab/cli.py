"""Batch front end: config files, run orchestration, CSV and manifest
output, and the built-in verification suites.

Config files are flat ``key = value`` text with dotted keys, one
assignment per line, # comments allowed. Every run writes its output
files plus a manifest.json recording the resolved configuration, code
version, wall time, per-check summary, and a sha256 digest of every
emitted file, so identical config and code give byte-identical output.

Exit codes: 0 success, 2 bad config, 3 numerical failure (the manifest
names the failing stage), 4 a verify subcommand found a failing check.
"""

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .errors import ConfigError, NumericalError, RieszlabError
from .grids import (build_radial_grid, AngularGrid, RadialProfile, Field2D,
                    sup_norm, l2_norm, project_mode)
from .kernels import gamma_kernel, kernel_values, op_L, op_Ls, apply_lf_kernel
from . import model as model_mod
from .elliptic import (solve_mode, exact_mode2, principal_remainder_split,
                       solve_full, apply_mode_operator, mode_residual)
from .evolution import FullState, step_linear, run_remainder_study
from .diagnostics import alpha_scaling_study


_DEFAULTS = {
    "alpha": 0.1,
    "delta": 1.0,
    "grid.r_max": 8.0,
    "grid.n_r": 512,
    "grid.spacing": "geometric",
    "grid.n_theta": 256,
    "time.dt_factor": 1.0 / 50.0,
    "time.horizon_factor": 0.1,
    "time.sample_count": 200,
    "initial.kind": "bump",
    "initial.center": 2.0,
    "initial.width": 1.0,
    "initial.amplitude": None,
    "initial.table_path": "",
    "run.kind": "model",
    "run.alphas": "0.4,0.2,0.1",
    "output.dir": "rieszlab-out",
}

_INT_KEYS = {"grid.n_r", "grid.n_theta", "time.sample_count"}
_FLOAT_KEYS = {"alpha", "delta", "grid.r_max", "time.dt_factor",
               "time.horizon_factor", "initial.center", "initial.width",
               "initial.amplitude"}
_CHOICES = {
    "grid.spacing": ("geometric", "uniform"),
    "initial.kind": ("bump", "indicator", "table"),
    "run.kind": ("model", "linear", "full", "remainder", "sweep"),
}


class RunConfig:
    """Resolved, validated run parameters."""

    def __init__(self, values):
        self.values = dict(values)
        self.alpha = values["alpha"]
        self.delta = values["delta"]
        self.r_max = values["grid.r_max"]
        self.n_r = values["grid.n_r"]
        self.spacing = values["grid.spacing"]
        self.n_theta = values["grid.n_theta"]
        self.dt_factor = values["time.dt_factor"]
        self.horizon_factor = values["time.horizon_factor"]
        self.sample_count = values["time.sample_count"]
        self.initial_kind = values["initial.kind"]
        self.center = values["initial.center"]
        self.width = values["initial.width"]
        amp = values["initial.amplitude"]
        self.amplitude = self.delta if amp is None else amp
        self.table_path = values["initial.table_path"]
        self.run_kind = values["run.kind"]
        self.alphas = tuple(float(a) for a in
                            str(values["run.alphas"]).split(",") if a != "")
        self.output_dir = values["output.dir"]

    def echo(self):
        out = dict(self.values)
        out["initial.amplitude"] = self.amplitude
        return out

    def replaced(self, **overrides):
        vals = dict(self.values)
        vals.update(overrides)
        return validate_config(vals)


def validate_config(values):
    merged = dict(_DEFAULTS)
    merged.update(values)
    alpha = merged["alpha"]
    if not (0.0 < alpha < 1.0):
        raise ConfigError("alpha ∈ (0,1) is required, got %g" % alpha)
    if merged["delta"] <= 0:
        raise ConfigError("delta must be positive")
    if merged["grid.n_theta"] % 4 != 0:
        raise ConfigError("grid.n_theta must be a multiple of 4")
    if merged["grid.n_r"] < 8:
        raise ConfigError("grid.n_r must be at least 8")
    if merged["grid.r_max"] <= 0:
        raise ConfigError("grid.r_max must be positive")
    if merged["time.dt_factor"] <= 0 or merged["time.horizon_factor"] <= 0:
        raise ConfigError("time factors must be positive")
    if merged["time.sample_count"] < 2:
        raise ConfigError("time.sample_count must be at least 2")
    amp = merged["initial.amplitude"]
    if amp is not None and amp < 0:
        raise ConfigError("initial.amplitude must be nonnegative")
    kind = merged["initial.kind"]
    if kind == "bump":
        lo = merged["initial.center"] - merged["initial.width"]
        hi = merged["initial.center"] + merged["initial.width"]
    elif kind == "indicator":
        lo = merged["initial.center"] - 0.5 * merged["initial.width"]
        hi = merged["initial.center"] + 0.5 * merged["initial.width"]
    else:
        if not merged["initial.table_path"]:
            raise ConfigError("initial.table_path is required for "
                              "initial.kind = table")
        lo, hi = None, None
    if lo is not None:
        if lo < 1.0:
            raise ConfigError('support must avoid [0,1); initial data '
                              'starts at %g' % lo)
        if hi > 0.8 * merged["grid.r_max"]:
            raise ConfigError("support must end inside 0.8*r_max = %g, "
                              "got %g" % (0.8 * merged["grid.r_max"], hi))
    try:
        tuple(float(a) for a in str(merged["run.alphas"]).split(",")
              if a != "")
    except ValueError:
        raise ConfigError("run.alphas must be comma-separated numbers")
    return RunConfig(merged)


def parse_config(path):
    """Read and validate a flat dotted-key config file."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc))
    values = {}
    for ln, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("%s:%d: expected key = value, got %r"
                              % (path, ln, line))
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _DEFAULTS:
            raise ConfigError("%s:%d: unknown key %r" % (path, ln, key))
        try:
            if key in _INT_KEYS:
                values[key] = int(val)
            elif key in _FLOAT_KEYS:
                values[key] = float(val)
            else:
                values[key] = val
        except ValueError:
            raise ConfigError("%s:%d: bad value %r for %s"
                              % (path, ln, val, key))
        if key in _CHOICES and values[key] not in _CHOICES[key]:
            raise ConfigError("%s:%d: %s must be one of %s"
                              % (path, ln, key, "|".join(_CHOICES[key])))
    return validate_config(values)


def build_grids(config):
    rgrid = build_radial_grid(1e-3 * config.r_max, config.r_max,
                              config.n_r, config.spacing)
    return rgrid, AngularGrid(config.n_theta)


def build_profile(config, rgrid):
    kind = config.initial_kind
    if kind == "bump":
        return model_mod.make_bump(rgrid, config.center, config.width,
                                   config.amplitude)
    if kind == "indicator":
        return model_mod.make_indicator(
            rgrid, config.center - 0.5 * config.width,
            config.center + 0.5 * config.width, config.amplitude)
    try:
        table = np.loadtxt(config.table_path)
    except OSError as exc:
        raise ConfigError("cannot read initial.table_path: %s" % exc)
    if table.ndim != 2 or table.shape[1] < 2:
        raise ConfigError("initial table needs two columns: R, value")
    vals = np.interp(rgrid.nodes, table[:, 0], table[:, 1], left=0.0,
                     right=0.0)
    nz = rgrid.nodes[vals != 0.0]
    if nz.size:
        if nz.min() < 1.0:
            raise ConfigError("support must avoid [0,1); table data starts "
                              "at %g" % nz.min())
        if nz.max() > 0.8 * config.r_max:
            raise ConfigError("support must end inside 0.8*r_max")
    return RadialProfile(rgrid, vals)


def _format_row(row):
    return ",".join("%.17g" % v for v in row)


def _write_csv(path, header, columns):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(header + "\n")
        for row in zip(*columns):
            fh.write(_format_row(row) + "\n")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


class RunManifest:
    """What a run did: resolved config, code version, wall time, named
    checks, emitted files with digests, and the error if one stopped it."""

    def __init__(self, config_echo, out_dir):
        self.config_echo = config_echo
        self.out_dir = out_dir
        self.version = __version__
        self.wall_time = 0.0
        self.checks = {}
        self.files = {}
        self.error = None

    def add_files(self, paths):
        for p in paths:
            rel = os.path.relpath(p, self.out_dir)
            self.files[rel] = _sha256(p)

    def write(self):
        path = os.path.join(self.out_dir, "manifest.json")
        payload = {
            "config": self.config_echo,
            "version": self.version,
            "wall_time_s": self.wall_time,
            "checks": self.checks,
            "files": self.files,
            "error": self.error,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def _growth_times(config, alpha):
    t_final = config.horizon_factor * alpha * abs(np.log(alpha))
    return np.linspace(0.0, t_final, config.sample_count)


def _support_inf_index(f0):
    nz = f0.values > 0
    return int(np.argmax(nz)) if np.any(nz) else 0


def _run_model(config, out_dir, manifest):
    rgrid, agrid = build_grids(config)
    f0 = build_profile(config, rgrid)
    state = model_mod.init_state(f0, config.alpha)
    times = _growth_times(config, config.alpha)
    dt = config.alpha * config.dt_factor
    j0 = _support_inf_index(f0)
    sup, l2, ls_inf, a_max = [], [], [], []
    violations = 0
    for ts in times:
        while state.t < ts - 1e-14 * max(times[-1], 1.0):
            state = model_mod.step(state, min(dt, ts - state.t))
        sup.append(model_mod.sup_omega2(state))
        l2.append(l2_norm(model_mod.reconstruct_Omega2(state, agrid)))
        ls_inf.append(float(model_mod.eval_Ls(state).values[j0]))
        a_max.append(float(np.max(state.A.values)))
        violations += model_mod.check_sandwich(state).n_violations
    path = os.path.join(out_dir, "growth.csv")
    _write_csv(path, "t,sup_norm,l2_norm,Ls_at_support_inf,A_max",
               [times, sup, l2, ls_inf, a_max])
    manifest.checks["sandwich"] = ("pass" if violations == 0
                                   else "fail: %d node-times" % violations)
    manifest.checks["finite_norms"] = (
        "pass" if np.all(np.isfinite(sup)) and np.all(np.isfinite(l2))
        else "fail")
    return [path]


def _run_linear(config, out_dir, manifest):
    rgrid, agrid = build_grids(config)
    f0 = build_profile(config, rgrid)
    omega0 = Field2D(rgrid, agrid,
                     np.outer(f0.values, np.sin(2.0 * agrid.nodes)))
    state = FullState(config.alpha, omega0, 0.0)
    times = _growth_times(config, config.alpha)
    j0 = _support_inf_index(f0)
    ls0 = op_Ls(omega0).values
    sup, l2, ls_inf, a_max = [], [], [], []
    worst = 0.0
    for ts in times:
        if ts > state.t:
            state = step_linear(state, ts - state.t)
        om = state.omega
        sup.append(sup_norm(om))
        l2.append(l2_norm(om))
        ls_inf.append(float(op_Ls(om).values[j0]))
        a_max.append(2.0 * float(np.max(project_mode(om, 0, "cos").values)))
        exact = omega0.values + (0.5 * ts / config.alpha) * ls0[:, None]
        scale = max(float(np.max(np.abs(exact))), 1e-300)
        worst = max(worst, float(np.max(np.abs(om.values - exact))) / scale)
    path = os.path.join(out_dir, "growth.csv")
    _write_csv(path, "t,sup_norm,l2_norm,Ls_at_support_inf,A_max",
               [times, sup, l2, ls_inf, a_max])
    manifest.checks["closed_form"] = ("pass (%.2e)" % worst if worst <= 1e-10
                                      else "fail: %.2e" % worst)
    return [path]


def _run_remainder(config, out_dir, manifest, alpha=None):
    alpha = config.alpha if alpha is None else alpha
    rgrid, agrid = build_grids(config)
    f0 = build_profile(config, rgrid)
    t_final = config.horizon_factor * alpha * abs(np.log(alpha))
    series = run_remainder_study(f0, alpha, agrid, t_final=t_final,
                                 n_samples=config.sample_count,
                                 model_dt_factor=config.dt_factor)
    growth = os.path.join(out_dir, "growth.csv")
    _write_csv(growth, "t,sup_norm,l2_norm,Ls_at_support_inf,A_max",
               [series.t, series.full_sup, series.full_l2, series.ls_inf,
                series.a_proxy])
    rem = os.path.join(out_dir, "remainder.csv")
    _write_csv(rem, "t,rem_sup,rem_l2,full_sup,model_sup",
               [series.t, series.rem_sup, series.rem_l2, series.full_sup,
                series.model_sup])
    manifest.checks["support_containment"] = "pass"
    manifest.checks["finite_norms"] = (
        "pass" if np.all(np.isfinite(series.full_sup)) else "fail")
    return [growth, rem], series


def _run_full(config, out_dir, manifest):
    paths, series = _run_remainder(config, out_dir, manifest)
    # full kind reports the same growth history without the model columns
    os.remove(paths[1])
    return [paths[0]]


def _sweep_member(args):
    values, alpha, member_dir = args
    config = validate_config(values)
    os.makedirs(member_dir, exist_ok=True)
    manifest = RunManifest(config.echo(), member_dir)
    manifest.config_echo["alpha"] = alpha
    t0 = time.perf_counter()
    try:
        paths, series = _run_remainder(config, member_dir, manifest,
                                       alpha=alpha)
        manifest.add_files(paths)
        manifest.wall_time = time.perf_counter() - t0
        mpath = manifest.write()
        return alpha, series.max_rem_sup(), paths + [mpath], None
    except RieszlabError as exc:
        manifest.error = {"type": type(exc).__name__, "message": str(exc),
                          "stage": getattr(exc, "stage", "")}
        manifest.wall_time = time.perf_counter() - t0
        mpath = manifest.write()
        return alpha, float("nan"), [mpath], exc


def _run_sweep(config, out_dir, manifest):
    jobs = []
    for alpha in config.alphas:
        member_dir = os.path.join(out_dir, "alpha_%g" % alpha)
        jobs.append((dict(config.values), alpha, member_dir))
    workers = min(len(jobs), os.cpu_count() or 1)
    results = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for res in pool.map(_sweep_member, jobs):
            results.append(res)
    paths = []
    for alpha, peak, member_paths, err in results:
        paths.extend(member_paths)
        if err is not None:
            raise NumericalError("sweep member alpha=%g failed: %s"
                                 % (alpha, err),
                                 stage=getattr(err, "stage", "sweep"))
    alphas = np.array([r[0] for r in results])
    peaks = np.array([r[1] for r in results])
    try:
        report = alpha_scaling_study(list(zip(alphas, peaks)))
        cumulative = report.cumulative
        manifest.checks["scaling_exponent"] = "%.6f" % report.exponent
    except ValueError as exc:
        cumulative = np.full(alphas.size, np.nan)
        manifest.checks["scaling_exponent"] = "unavailable: %s" % exc
    spath = os.path.join(out_dir, "scaling_report.csv")
    _write_csv(spath, "alpha,max_rem_sup,fit_exponent_cumulative",
               [alphas, peaks, cumulative])
    return paths + [spath]


def run(config):
    """Execute a validated config; always writes manifest.json."""
    out_dir = config.output_dir
    os.makedirs(out_dir, exist_ok=True)
    manifest = RunManifest(config.echo(), out_dir)
    t0 = time.perf_counter()
    try:
        if config.run_kind == "model":
            paths = _run_model(config, out_dir, manifest)
        elif config.run_kind == "linear":
            paths = _run_linear(config, out_dir, manifest)
        elif config.run_kind == "full":
            paths = _run_full(config, out_dir, manifest)
        elif config.run_kind == "remainder":
            paths, _ = _run_remainder(config, out_dir, manifest)
        else:
            paths = _run_sweep(config, out_dir, manifest)
        manifest.add_files(paths)
        manifest.wall_time = time.perf_counter() - t0
        manifest.write()
        return manifest
    except RieszlabError as exc:
        manifest.error = {"type": type(exc).__name__, "message": str(exc),
                          "stage": getattr(exc, "stage", "")}
        manifest.wall_time = time.perf_counter() - t0
        manifest.write()
        raise


def _report(lines, name, ok, detail):
    lines.append("%-4s %-28s %s" % ("ok" if ok else "FAIL", name, detail))
    return ok


def verify_kernel():
    """Kernel self-checks: quadrature vs closed form, sandwich, table."""
    lines, good = [], True
    pts = [0.0, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0]
    worst = 0.0
    for a in pts:
        K = gamma_kernel(a).value
        ref = 1.0 / np.cosh(0.5 * a) ** 2
        worst = max(worst, abs(K - ref) / ref)
    good &= _report(lines, "closed-form-identity", worst <= 1e-8,
                    "max rel %.2e over %d points" % (worst, len(pts)))
    a_dense = np.linspace(0.0, 40.0, 401)
    margin_lo, margin_hi = np.inf, np.inf
    for a in a_dense:
        K = gamma_kernel(a).value
        e = np.exp(-a)
        margin_lo = min(margin_lo, K - e * (1.0 - 1e-12))
        margin_hi = min(margin_hi, 4.0 * e * (1.0 + 1e-12) - K)
    good &= _report(lines, "kernel-sandwich", margin_lo >= 0 and
                    margin_hi >= 0, "min margins %.2e / %.2e"
                    % (margin_lo, margin_hi))
    a_tab = np.linspace(0.0, 39.5, 113)
    tab = kernel_values(a_tab)
    ref = 1.0 / np.cosh(0.5 * a_tab) ** 2
    tab_err = float(np.max(np.abs(tab - ref) / ref))
    good &= _report(lines, "memo-table", tab_err <= 1e-8,
                    "max rel %.2e" % tab_err)
    grid = build_radial_grid(0.5, 8.0, 4097)
    f0 = model_mod.make_indicator(grid, 1.0, 2.0)
    A0 = RadialProfile(grid, np.zeros(grid.n))
    lf = apply_lf_kernel(f0, A0).values
    tails = np.array([op_L(f0, R) for R in grid.nodes[::256]])
    diff = float(np.max(np.abs(lf[::256] - tails)))
    good &= _report(lines, "zero-exponent-reduction", diff <= 1e-12,
                    "max abs %.2e" % diff)
    return good, lines


def verify_elliptic():
    """Elliptic self-checks: oracle value, solver agreement, residual,
    split bound."""
    lines, good = [], True
    grid = build_radial_grid(0.5, 8.0, 4097)
    f = model_mod.make_indicator(grid, 1.0, 2.0)
    oracle = -255.0 / 4096.0
    v = exact_mode2(f, 0.5, R=2.0)
    good &= _report(lines, "mode2-closed-form", abs(v - oracle) /
                    abs(oracle) <= 1e-5, "rel %.2e" % (abs(v - oracle) /
                                                       abs(oracle)))
    bvp = solve_mode(2, f, 0.5)
    ex = exact_mode2(f, 0.5)
    dv = float(np.max(np.abs(bvp.values - ex.values)))
    good &= _report(lines, "bvp-vs-quadrature", dv <= 1e-4,
                    "max abs %.2e" % dv)
    smooth = model_mod.make_bump(grid)
    res = mode_residual(solve_mode(4, smooth, 0.3), smooth, 4, 0.3)
    good &= _report(lines, "stencil-residual", res <= 1e-9,
                    "max abs %.2e" % res)
    worst = 0.0
    for alpha in (0.4, 0.2, 0.1, 0.05):
        _, rem = principal_remainder_split(smooth, alpha)
        worst = max(worst, float(np.max(np.abs(rem.values)))
                    / float(np.max(smooth.values)))
    good &= _report(lines, "split-remainder-bound", worst <= 1.0 / 16.0,
                    "max ratio %.5f <= 0.0625" % worst)
    return good, lines


def verify_oracle():
    """Model integrator vs the closed-form solution for the simplified
    kernel, value and convergence order."""
    lines, good = [], True
    alpha = 0.25
    grid = build_radial_grid(0.5, 8.0, 20481)
    f0 = model_mod.make_indicator(grid, 1.0, 2.0)
    state = model_mod.init_state(f0, alpha,
                                 kernel=lambda a: np.exp(-np.asarray(a)))
    t_final = 0.5 * alpha
    dt = alpha / 200.0
    nsteps = int(round(t_final / dt))
    for _ in range(nsteps):
        state = model_mod.step(state, dt)
    L0 = apply_lf_kernel(f0, RadialProfile(grid, np.zeros(grid.n))).values
    acc = 2.0 * alpha * np.log1p((t_final / (2.0 * alpha)) * L0)
    got = alpha * state.A.values
    mask = acc > 1e-3 * acc.max()
    rel = float(np.max(np.abs(got[mask] - acc[mask]) / acc[mask]))
    good &= _report(lines, "closed-form-value", rel <= 1e-6,
                    "max rel %.2e at dt=alpha/200" % rel)
    coarse = build_radial_grid(0.5, 8.0, 1025)
    fs = model_mod.make_indicator(coarse, 1.0, 2.0, amplitude=40.0)
    errs = []
    t_short = 0.02 * alpha

    def integrate(nsteps):
        st = model_mod.init_state(fs, alpha,
                                  kernel=lambda a: np.exp(-np.asarray(a)))
        h = t_short / nsteps
        for _ in range(nsteps):
            st = model_mod.step(st, h)
        return st.A.values

    ref = integrate(80)
    for n in (5, 10, 20):
        errs.append(float(np.max(np.abs(integrate(n) - ref))))
    orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
    ok = all(3.7 <= o <= 4.3 for o in orders)
    good &= _report(lines, "time-order", ok,
                    "observed %s" % ", ".join("%.3f" % o for o in orders))
    return good, lines


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="rieszlab",
        description="Growth laws of a forced 2d vorticity model: batch "
                    "runs and self checks.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a config file")
    p_run.add_argument("config", help="path to a key = value config file")
    sub.add_parser("verify-kernel", help="kernel quadrature self checks")
    sub.add_parser("verify-elliptic", help="mode solver self checks")
    sub.add_parser("verify-oracle", help="model integrator self checks")
    args = parser.parse_args(argv)

    if args.command == "run":
        try:
            config = parse_config(args.config)
        except ConfigError as exc:
            print("config error: %s" % exc, file=sys.stderr)
            return 2
        try:
            manifest = run(config)
        except ConfigError as exc:
            print("config error: %s" % exc, file=sys.stderr)
            return 2
        except NumericalError as exc:
            print("numerical failure (%s): %s"
                  % (getattr(exc, "stage", "") or "run", exc),
                  file=sys.stderr)
            return 3
        print("wrote %s (%d files, %.1f s)"
              % (os.path.join(manifest.out_dir, "manifest.json"),
                 len(manifest.files), manifest.wall_time))
        for name, status in sorted(manifest.checks.items()):
            print("  %-20s %s" % (name, status))
        return 0

    suites = {"verify-kernel": verify_kernel,
              "verify-elliptic": verify_elliptic,
              "verify-oracle": verify_oracle}
    try:
        good, lines = suites[args.command]()
    except RieszlabError as exc:
        print("numerical failure: %s" % exc, file=sys.stderr)
        return 3
    for line in lines:
        print(line)
    return 0 if good else 4


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point.

Each subcommand writes ``<command>_summary.json``, one or more CSV tables and
``<command>_manifest.json`` into ``--out``.  A manifest can be passed back as
``--config`` to repeat the run; CSV outputs are then byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import BUILTINS, ConfigError, ControlConfig, ExperimentConfig, builtin_config, load_config
from .control import (ControlError, SimSpec, cost_functional, fbsde_solve, lq_riccati_oracle, policy_gain,
                      problem_from_config, verify_value_lower_bound)
from .evolution import (EvolutionError, default_history_grid, energy_distance, energy_norm,
                        quasi_dissipativity_form, random_admissible_state, semigroup_apply, smooth_test_state)
from .kernels import KernelError, kernel_from_config, sectoriality, validate_kernel
from .resolvent import (ResolventError, TimeGrid, double_square_integral, estimate_suite, fit_power_law,
                        laplace_identity_residual, solve_decayed, solve_scalar_resolvent)
from .spectral import SpectralError, basis_from_config, dirichlet_eigenvalues
from .stochastic import (NoiseSpec, PathEnsemble, PicardError, StochasticError, analytic_convolution_covariance,
                         nonlinearity_from_config, picard_diagnostics, sample_stochastic_convolution,
                         simulate_mild_solution, solve_mode_resolvents, write_raw_paths)

COMMANDS = ("validate-kernel", "resolvent", "semigroup", "simulate", "covariance", "control", "report")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# raised while building objects from the config -> exit 2; numerical breakdown mid-run -> exit 1
INPUT_ERRORS = (KernelError, SpectralError, StochasticError, EvolutionError, ControlError)
RUN_ERRORS = (PicardError, ResolventError)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    if x is None:
        return ""
    return str(x)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(x) for x in r])
    return path.name


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def write_json(path: Path, obj):
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path.name


def parse_modes(text: str):
    """'1..8', '1-8', '1,3,5' or a mix such as '1..4,9'."""
    modes = []
    for part in text.split(","):
        part = part.strip()
        m = re.fullmatch(r"(\d+)\s*(?:\.\.|-)\s*(\d+)", part)
        if m:
            a, b = int(m.group(1)), int(m.group(2))
            if a > b:
                raise UsageError(f"empty mode range {part!r}")
            modes.extend(range(a, b + 1))
        elif part.isdigit():
            modes.append(int(part))
        else:
            raise UsageError(f"cannot parse modes {text!r}")
    if not modes or min(modes) < 1:
        raise UsageError("modes must be positive integers")
    return modes


# ---------------------------------------------------------------------------
# Subcommands; each returns (summary, passed, csv names)
# ---------------------------------------------------------------------------

def cmd_validate_kernel(cfg: ExperimentConfig, out: Path):
    kernel = kernel_from_config(cfg.kernel_spec())
    grid = np.geomspace(1e-4, 50.0, 2000)
    rep = validate_kernel(kernel, grid)
    sec = sectoriality(kernel)
    rows = [(name, c["passed"], c["first_violation"], c["detail"]) for name, c in rep.checks.items()]
    files = [write_csv(out / "validate-kernel_checks.csv", ["check", "passed", "first_violation", "detail"], rows)]
    summary = {"kernel": kernel.describe(), **rep.to_dict(), "sectoriality": sec.to_dict()}
    return summary, rep.passed, files


def _mode_mu(cfg, modes):
    mu_all = dirichlet_eigenvalues(cfg.basis.domain, max(modes))
    return np.array([mu_all[j - 1] for j in modes])


def cmd_resolvent(cfg: ExperimentConfig, out: Path):
    kernel = kernel_from_config(cfg.kernel_spec())
    modes = list(cfg.grid.modes)
    mu = _mode_mu(cfg, modes)
    grid = TimeGrid.uniform(cfg.grid.T, cfg.grid.n_intervals)
    values = []
    est_rows = []
    exact_err = []
    for j, m in zip(modes, mu):
        res = solve_scalar_resolvent(float(m), kernel, grid, mode=j)
        values.append(res)
        if kernel.is_zero:
            exact_err.append(float(np.max(np.abs(res.s - np.exp(-m * kernel.k0 * grid.nodes)))))
        dec = solve_decayed(float(m), kernel, mode=j)
        est = estimate_suite(dec)
        lap = [laplace_identity_residual(dec, kernel, lam) for lam in cfg.grid.laplace_lambdas]
        dsq = double_square_integral(res, cfg.grid.T)
        est_rows.append([j, m, est["sup_s"], est["int_abs_sprime"], est["int_t_sprime"], est["int_abs_s"],
                         dsq, est["horizon"], est["truncated"], *lap])
    files = [write_csv(out / f"resolvent_mode_{j}.csv", ["t", "s", "s_prime"],
                       [[t, a, b] for t, a, b in zip(grid.nodes, res.s, res.s_prime)])
             for j, res in zip(modes, values)]
    lap_head = [f"laplace_residual_{lam:g}" for lam in cfg.grid.laplace_lambdas]
    files.append(write_csv(out / "resolvent_estimates.csv",
                           ["mode", "mu", "sup_s", "int_abs_sprime", "int_t_sprime", "int_abs_s",
                            "double_square_T", "horizon", "truncated", *lap_head], est_rows))
    keys = ["mode", "mu", "sup_s", "int_abs_sprime", "int_t_sprime", "int_abs_s", "double_square_T", "horizon",
            "truncated", *lap_head]
    files.append(write_json(out / "resolvent_estimates.json", {str(r[0]): dict(zip(keys, r)) for r in est_rows}))
    sec = sectoriality(kernel)
    theta, delta = sec.theta, sec.delta
    est = np.array([r[2:7] for r in est_rows], dtype=float)
    slopes = []
    finite = bool(np.all(np.isfinite(est)))
    if len(modes) >= 2:
        names = ["int_abs_s", "int_abs_sprime", "int_t_sprime", "double_square_T"]
        cols = [3, 1, 2, 4]
        refs = [-1.0 / delta, float("nan"), float("nan"), -(1.0 + theta) / delta]
        for name, c, ref in zip(names, cols, refs):
            v = est[:, c]
            slope = fit_power_law(mu, v) if np.all(v > 0) else float("nan")
            slopes.append([name, slope, ref])
        files.append(write_csv(out / "resolvent_slopes.csv", ["quantity", "slope", "reference"], slopes))
    sup_ok = bool(np.all(est[:, 0] <= 1 + 1e-9))
    decreasing = bool(np.all(np.diff(est[:, 3]) < 0)) if len(modes) > 1 else True
    lap_max = float(np.max([r[9:] for r in est_rows])) if lap_head else 0.0
    summary = {"modes": modes, "mu": mu, "theta": theta, "delta": delta, "all_finite": finite,
               "sup_bound_ok": sup_ok, "int_abs_s_decreasing": decreasing,
               "laplace_residual_max": lap_max,
               "slopes": {s[0]: {"slope": s[1], "reference": s[2]} for s in slopes}}
    if exact_err:
        summary["exact_sup_error"] = max(exact_err)
    passed = finite and sup_ok
    return summary, passed, files


def cmd_semigroup(cfg: ExperimentConfig, out: Path):
    kernel = kernel_from_config(cfg.kernel_spec())
    N = cfg.basis.N
    mu = dirichlet_eigenvalues(cfg.basis.domain, N)
    hgrid = default_history_grid(kernel)
    x = smooth_test_state(N, hgrid)
    t1, t2 = cfg.grid.t1, cfg.grid.t2
    dt = min(cfg.noise.dt, 1e-3)
    a = semigroup_apply(t1 + t2, x, None, kernel, mu=mu, dt=dt)
    b = semigroup_apply(t2, semigroup_apply(t1, x, None, kernel, mu=mu, dt=dt), None, kernel, mu=mu, dt=dt)
    err = energy_distance(a, b, kernel, mu)
    files = [write_csv(out / "semigroup_flow.csv", ["t1", "t2", "energy_error", "norm_x", "norm_result"],
                       [[t1, t2, err, energy_norm(x, kernel, mu), energy_norm(a, kernel, mu)]])]
    snap_rows = []
    for t in sorted(cfg.grid.times):
        st = semigroup_apply(float(t), x, None, kernel, mu=mu, dt=dt)
        for j in range(N):
            snap_rows.append([t, j + 1, 0.0, st.v[j]])
            snap_rows.extend([t, j + 1, lag, val] for lag, val in zip(st.history_grid, st.eta[j]))
    files.append(write_csv(out / "semigroup_snapshots.csv", ["t", "mode", "lag", "value"], snap_rows))
    rng = np.random.default_rng(cfg.seed)
    rows = []
    violations = 0
    for i in range(cfg.grid.n_states):
        st = random_admissible_state(rng, N, hgrid)
        for eps in cfg.grid.epsilons:
            r = quasi_dissipativity_form(st, kernel, mu, epsilon=eps)
            violations += not r["satisfied"]
            rows.append([i, eps, r["form_value"], r["bound"], r["lambda0"], r["norm_sq"], r["satisfied"]])
    files.append(write_csv(out / "semigroup_dissipativity.csv",
                           ["state", "epsilon", "form_value", "bound", "lambda0", "norm_sq", "satisfied"], rows))
    summary = {"flow_error": err, "flow_tolerance": 1e-5, "flow_ok": err <= 1e-5,
               "dissipativity_checks": len(rows), "dissipativity_violations": violations}
    return summary, bool(err <= 1e-5 and violations == 0), files


def _output_times(cfg, dt, T):
    steps = sorted({int(round(t / dt)) for t in cfg.grid.times if t <= T + 1e-12})
    return np.array(steps, dtype=int)


def cmd_simulate(cfg: ExperimentConfig, out: Path):
    kernel = kernel_from_config(cfg.kernel_spec())
    basis = basis_from_config(cfg.basis_spec())
    f = nonlinearity_from_config({"name": cfg.nonlinearity.name, "params": cfg.nonlinearity.params})
    spec = NoiseSpec(basis, cfg.seed, cfg.noise.n_paths, cfg.noise.dt)
    hgrid = default_history_grid(kernel)
    state0 = smooth_test_state(basis.N, hgrid)
    run = simulate_mild_solution(state0, f, spec, cfg.grid.T, kernel=kernel, workers=cfg.workers)
    ens = run.ensemble
    idx = _output_times(cfg, spec.dt, cfg.grid.T)
    mean, var = ens.mean(), ens.variance()
    rows = [[ens.times[i], j + 1, mean[i, j], var[i, j]] for i in idx for j in range(basis.N)]
    files = [write_csv(out / "simulate_moments.csv", ["t", "mode", "mean", "variance"], rows)]
    sub = PathEnsemble(ens.times[idx], ens.values[:, idx], ens.stream_ids, ens.seed, ens.dt)
    write_raw_paths(out / "simulate_paths.bin", sub)
    diag = picard_diagnostics(run)
    files.append(write_csv(out / "simulate_picard.csv", ["window", "iteration", "l2_gap", "sup_gap"],
                           [[w, k, g, s] for w, (gs, ss) in enumerate(zip(run.gaps, run.sup_gaps))
                            for k, (g, s) in enumerate(zip(gs, ss))]))
    summary = {"method": run.method, "lipschitz": run.lipschitz, "rate_estimate": diag["rate_estimate"],
               "window_rates": diag["window_rates"], "iterations": diag["iterations"],
               "n_paths": spec.n_paths, "dt": spec.dt, "raw_paths": "simulate_paths.bin"}
    return summary, True, files


def cmd_covariance(cfg: ExperimentConfig, out: Path):
    kernel = kernel_from_config(cfg.kernel_spec())
    basis = basis_from_config(cfg.basis_spec())
    spec = NoiseSpec(basis, cfg.seed, cfg.noise.n_paths, cfg.noise.dt)
    res = solve_mode_resolvents(kernel, basis.mu, workers=cfg.workers)
    times = np.array(cfg.grid.times, dtype=float)
    ens = sample_stochastic_convolution(spec, res, times, workers=cfg.workers)
    var = ens.variance()
    n = spec.n_paths
    tol = max(0.05, 5.0 * math.sqrt(2.0 / max(n - 1, 1)))
    rows, worst = [], 0.0
    for i, t in enumerate(ens.times):
        ana = analytic_convolution_covariance(res, basis, float(t))["variances"]
        for j in range(basis.N):
            included = ana[j] > 1e-8
            rel = abs(var[i, j] - ana[j]) / ana[j] if ana[j] > 0 else float("nan")
            if included:
                worst = max(worst, rel)
            rows.append([t, j + 1, var[i, j], ana[j], rel, included])
    files = [write_csv(out / "covariance.csv", ["t", "mode", "empirical", "analytic", "rel_error", "included"],
                       rows)]
    summary = {"max_rel_error": worst, "tolerance": tol, "n_paths": n, "dt": spec.dt, "N": basis.N}
    return summary, worst <= tol, files


def cmd_control(cfg: ExperimentConfig, out: Path):
    c = cfg.control or ControlConfig()
    kernel = kernel_from_config(cfg.kernel_spec())
    problem = problem_from_config({"name": c.problem, **c.params}, kernel)
    spec = SimSpec(cfg.seed, c.n_paths, c.n_steps)
    result = fbsde_solve(problem, spec, degree=c.degree)
    rollout = cost_functional(problem, result.policy, spec, seed_offset=1)
    zero = cost_functional(problem, 0.0, spec, seed_offset=1)
    bound = verify_value_lower_bound(problem, result.Y0, c.m_random, spec)
    files = [write_csv(out / "control_regression.csv", ["step", "rank", "n_features", "rank_deficient"],
                       [[d["step"], d["rank"], d["n_features"], d["rank_deficient"]] for d in result.diagnostics])]
    roll_rows = [["feedback", rollout["J_estimate"], rollout["std_error"]],
                 ["zero", zero["J_estimate"], zero["std_error"]]]
    summary = {"problem": problem.name, "params": problem.params, "Y0": result.Y0,
               "Y0_std_error": result.Y0_std_error, "iterations": result.iterations,
               "converged": result.converged, "Y0_history": result.Y0_history,
               "rollout": rollout, "zero_control": zero,
               "lower_bound_violations": bound["violations"], "m_random": c.m_random,
               "rank_deficient_steps": [d["step"] for d in result.diagnostics if d["rank_deficient"]]}
    passed = bound["violations"] == 0
    if problem.name == "lq":
        p = problem.params
        orc = lq_riccati_oracle(p["a"], p["b"], p["q"], p["p_T"], p["T"], p["x0"])
        t_or, P = orc["t"], orc["P"]

        def riccati_feedback(t, S):
            return np.clip(-p["b"] * np.interp(t, t_or, P) * S[:, 0], *problem.U)

        opt = cost_functional(problem, riccati_feedback, spec, seed_offset=1)
        roll_rows.append(["riccati_feedback", opt["J_estimate"], opt["std_error"]])
        V = orc["optimal_cost"]
        comp = [["Y0", result.Y0, V, abs(result.Y0 - V) / V],
                ["feedback_rollout", rollout["J_estimate"], V, abs(rollout["J_estimate"] - V) / V],
                ["riccati_feedback_rollout", opt["J_estimate"], V, abs(opt["J_estimate"] - V) / V]]
        files.append(write_csv(out / "control_riccati.csv", ["quantity", "value", "riccati", "rel_error"], comp))
        # feedback slope around the visited state range vs -b P(t); averaged over t in [0.4 T, 0.6 T]
        dt = problem.T / c.n_steps
        gain_rows, mid = [], []
        for i in range(1, c.n_steps):
            t = i * dt
            spread = max(abs(p["b"]) * math.sqrt(t), 1e-3)
            centre = p["x0"] * math.exp(p["a"] * t)
            fitted = policy_gain(result.policy, i, centre, spread)
            exact = -p["b"] * float(np.interp(t, t_or, P))
            ratio = fitted / exact if exact != 0 else float("nan")
            gain_rows.append([i, t, fitted, exact, ratio])
            if 0.4 * problem.T - 1e-12 <= t <= 0.6 * problem.T + 1e-12:
                mid.append(ratio)
        files.append(write_csv(out / "control_gain.csv", ["step", "t", "fitted_gain", "riccati_gain", "ratio"],
                               gain_rows))
        summary["mid_horizon_gain_ratio"] = float(np.mean(mid)) if mid else float("nan")
        summary["riccati_cost"] = V
        summary["riccati_P0"] = orc["P0"]
        summary["rel_error_Y0"] = comp[0][3]
        summary["rel_error_rollout"] = comp[1][3]
        passed = passed and comp[0][3] <= 0.05 and comp[1][3] <= 0.05
    files.append(write_csv(out / "control_rollout.csv", ["policy", "J_estimate", "std_error"], roll_rows))
    files.append(write_csv(out / "control_lower_bound.csv",
                           ["control", "J_estimate", "std_error", "violation"],
                           [[r["control"], r["J_estimate"], r["std_error"], r["violation"]] for r in bound["rows"]]))
    return summary, bool(passed), files


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

FAMILIES = {
    "kernel": ("validate-kernel", lambda s: {"passed": s["passed"], "theta": s["sectoriality"]["theta"],
                                             "delta": s["sectoriality"]["delta"]}),
    "resolvent_estimates": ("resolvent", lambda s: {"all_finite": s["all_finite"],
                                                    "sup_bound_ok": s["sup_bound_ok"],
                                                    "int_abs_s_decreasing": s["int_abs_s_decreasing"],
                                                    "laplace_residual_max": s["laplace_residual_max"]}),
    "scaling": ("resolvent", lambda s: {k: v["slope"] for k, v in s["slopes"].items()}),
    "semigroup": ("semigroup", lambda s: {"flow_error": s["flow_error"], "flow_ok": s["flow_ok"]}),
    "dissipativity": ("semigroup", lambda s: {"checks": s["dissipativity_checks"],
                                              "violations": s["dissipativity_violations"]}),
    "covariance": ("covariance", lambda s: {"max_rel_error": s["max_rel_error"], "tolerance": s["tolerance"]}),
    "mild_solution": ("simulate", lambda s: {"rate_estimate": s["rate_estimate"], "method": s["method"]}),
    "control": ("control", lambda s: {k: s[k] for k in ("Y0", "lower_bound_violations", "converged",
                                                       "riccati_cost", "rel_error_Y0", "rel_error_rollout",
                                                       "mid_horizon_gain_ratio")
                                      if k in s}),
}


def emit_report(out: Path) -> dict:
    """Merge the summaries found in ``out`` into report.json and report.csv."""
    summaries, missing = {}, []
    for cmd in COMMANDS[:-1]:
        p = out / f"{cmd}_summary.json"
        if p.exists():
            doc = json.loads(p.read_text())
            summaries[cmd] = doc
    families = {}
    for fam, (cmd, pick) in FAMILIES.items():
        if cmd in summaries:
            entry = pick(summaries[cmd]["summary"])
            entry["passed"] = summaries[cmd]["passed"]
            families[fam] = entry
        else:
            missing.append(fam)
    if not summaries:
        missing = []
    report = {"families": families, "missing": missing}
    write_json(out / "report.json", report)
    rows = [[fam, k, v] for fam, entry in sorted(families.items()) for k, v in sorted(entry.items())]
    write_csv(out / "report.csv", ["family", "key", "value"], rows)
    return report


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

HANDLERS = {"validate-kernel": cmd_validate_kernel, "resolvent": cmd_resolvent, "semigroup": cmd_semigroup,
            "simulate": cmd_simulate, "covariance": cmd_covariance, "control": cmd_control}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="volterra-spde", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help=f"JSON config, run manifest, or a built-in name {sorted(BUILTINS)}")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--modes", help="e.g. 1..8 or 1,2,5")
    parser.add_argument("--paths", type=int)
    parser.add_argument("--dt", type=float)
    parser.add_argument("--benchmark", choices=["lq"])
    return parser


def resolve_config(args) -> ExperimentConfig:
    if args.config is None:
        cfg = builtin_config("default")
    elif args.config in BUILTINS and not Path(args.config).exists():
        cfg = builtin_config(args.config)
    else:
        cfg, _ = load_config(args.config)
    if args.benchmark == "lq":
        params = dict(BUILTINS["lq"]["control"]["params"])
        base = cfg.control or ControlConfig()
        cfg.control = ControlConfig(problem="lq", params=params, n_paths=base.n_paths, n_steps=base.n_steps,
                                    degree=base.degree, m_random=base.m_random)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if args.out is not None:
        cfg.out = args.out
    if args.modes is not None:
        modes = parse_modes(args.modes)
        cfg.grid.modes = modes
        if args.command != "resolvent":
            cfg.basis.N = max(modes)
    if args.paths is not None:
        cfg.noise.n_paths = args.paths
        if cfg.control is not None:
            cfg.control.n_paths = args.paths
    if args.dt is not None:
        cfg.noise.dt = args.dt
    if args.command == "control" and cfg.control is None:
        cfg.control = ControlConfig()
    return cfg.validate()


def run_command(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print("config errors:", file=sys.stderr)
        for p in exc.problems:
            print(f"  - {p}", file=sys.stderr)
        return EXIT_USAGE
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.command == "report":
        report = emit_report(out)
        print(json.dumps({"families": sorted(report["families"]), "missing": report["missing"]}))
        return EXIT_OK
    start = time.perf_counter()
    try:
        summary, passed, files = HANDLERS[args.command](cfg, out)
    except INPUT_ERRORS as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RUN_ERRORS as exc:
        print(f"{args.command} failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    elapsed = time.perf_counter() - start
    write_json(out / f"{args.command}_summary.json",
               {"command": args.command, "passed": bool(passed), "summary": summary, "runtime_s": elapsed})
    write_json(out / f"{args.command}_manifest.json",
               {"manifest_version": 1, "command": args.command, "package_version": __version__,
                "config": cfg.to_dict(), "outputs": files})
    print(f"{args.command}: {'ok' if passed else 'FAILED'} ({elapsed:.2f} s) -> {out}")
    return EXIT_OK if passed else EXIT_FAIL


def main():
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()

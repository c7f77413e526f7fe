"""Stochastic convolution sampling and mild solutions in spectral coordinates.

All path quantities are built from per-mode lag tables on a uniform step
dt.  With c_l the mean of s_j over the cell [l dt, (l+1) dt],

    W_j(t_m) = sqrt(lambda_j) sum_{i<m} c_{m-1-i} dB_{j,i},

which is the conditional expectation of the exact Ito integral given the
increments.  Drift terms use product integration against piecewise-linear
f, so the Picard map is implicit in the newest step.

Paths are processed in fixed blocks of ``BLOCK`` paths; the worker count
only decides which thread handles a block, never what it computes.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._quad import gauss_legendre_unit
from ._rng import brownian_increments
from .evolution import HistoryState, evolve_trajectory
from .kernels import MemoryKernel
from .resolvent import ScalarResolvent, TimeGrid, solve_decayed, square_integral
from .spectral import SpectralBasis, physical_grid, to_physical, to_spectral, trace_condition

__all__ = [
    "StochasticError",
    "PicardError",
    "NoiseSpec",
    "PathEnsemble",
    "NonlinearTerm",
    "MildRun",
    "nonlinearity",
    "nonlinearity_from_config",
    "lag_tables",
    "solve_mode_resolvents",
    "sample_stochastic_convolution",
    "analytic_convolution_covariance",
    "simulate_mild_solution",
    "picard_diagnostics",
    "write_raw_paths",
    "read_raw_paths",
]

BLOCK = 500


class StochasticError(ValueError):
    pass


class PicardError(RuntimeError):
    def __init__(self, message, diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class NoiseSpec:
    basis: SpectralBasis
    seed: int
    n_paths: int
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise StochasticError("dt must be positive")
        if self.n_paths < 1:
            raise StochasticError("n_paths must be at least 1")
        if not 0 <= int(self.seed) < 2**64:
            raise StochasticError("seed must fit in 64 unsigned bits")


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    times: np.ndarray
    values: np.ndarray            # (n_paths, len(times), N)
    stream_ids: np.ndarray
    seed: int
    dt: float

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    def mean(self) -> np.ndarray:
        return self.values.mean(axis=0)

    def variance(self) -> np.ndarray:
        ddof = 1 if self.n_paths > 1 else 0
        return self.values.var(axis=0, ddof=ddof)


# ---------------------------------------------------------------------------
# Nonlinearities
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NonlinearTerm:
    f: Callable
    lipschitz_L: float
    name: str = "custom"
    params: dict = field(default_factory=dict)

    @property
    def is_zero(self) -> bool:
        return self.name == "zero"

    def __call__(self, t, x):
        return self.f(t, x)

    def check(self, rng: Optional[np.random.Generator] = None, n: int = 2000,
              scale: float = 10.0, T: float = 1.0) -> dict:
        """Spot-check the Lipschitz and linear-growth bounds on random pairs."""
        rng = rng or np.random.default_rng(0)
        t = rng.uniform(0.0, T, n)
        x = scale * rng.standard_normal(n)
        y = x + rng.standard_normal(n) * np.where(rng.random(n) < 0.5, 1e-3, scale)
        fx, fy = np.broadcast_to(self.f(t, x), x.shape), np.broadcast_to(self.f(t, y), y.shape)
        L = self.lipschitz_L
        dx = np.abs(x - y)
        lip = np.max(np.abs(fx - fy) / np.where(dx > 0, dx, np.inf))
        growth = np.max(np.abs(fx) / (1.0 + np.abs(x)))
        # rounding slack scaled by the size of f, so near-equal pairs do not trip the test
        slack = 1e-9 * (1.0 + np.abs(fx) + np.abs(fy))
        ok = bool(np.all(np.abs(fx - fy) <= L * dx + slack)
                  and np.all(np.abs(fx) <= L * (1.0 + np.abs(x)) + slack))
        return {"ok": ok, "lipschitz_ratio": float(lip), "growth_ratio": float(growth), "L": L}


def nonlinearity(name: str, **params) -> NonlinearTerm:
    """Built-in f(t, x): zero, constant(c), linear(a), sine(L), saturating(L), quadratic(a)."""
    if name == "zero":
        return NonlinearTerm(lambda t, x: np.zeros_like(np.asarray(x, dtype=float)), 0.0, "zero", {})
    if name == "constant":
        c = float(params.get("c", 1.0))
        return NonlinearTerm(lambda t, x: np.full_like(np.asarray(x, dtype=float), c), abs(c),
                             "constant", {"c": c})
    if name == "linear":
        a = float(params.get("a", 1.0))
        return NonlinearTerm(lambda t, x: a * np.asarray(x, dtype=float), abs(a), "linear", {"a": a})
    if name == "sine":
        L = float(params.get("L", 1.0))
        return NonlinearTerm(lambda t, x: L * np.sin(x), L, "sine", {"L": L})
    if name == "saturating":
        L = float(params.get("L", 1.0))
        return NonlinearTerm(lambda t, x: L * np.tanh(x), L, "saturating", {"L": L})
    if name == "quadratic":
        a = float(params.get("a", 1.0))
        # declared constant cannot hold globally; check() reports it
        return NonlinearTerm(lambda t, x: a * np.asarray(x, dtype=float) ** 2, float(params.get("L", abs(a))),
                             "quadratic", {"a": a})
    raise StochasticError(f"unknown nonlinearity {name!r}")


def nonlinearity_from_config(spec) -> NonlinearTerm:
    if spec is None:
        return nonlinearity("zero")
    if isinstance(spec, str):
        return nonlinearity(spec)
    spec = dict(spec)
    return nonlinearity(spec.pop("name"), **spec.get("params", spec))


# ---------------------------------------------------------------------------
# Lag tables
# ---------------------------------------------------------------------------

def lag_tables(res: ScalarResolvent, dt: float, n: int, sub: int = 4, order: int = 8):
    """Cell tables of s on [l dt, (l+1) dt], l = 0..n-1.

    Returns (c, alpha, beta): c_l is the cell mean, alpha_l/beta_l integrate
    s against the rising/falling linear hats on the cell, so that
    alpha_l + beta_l = c_l dt.
    """
    x, w = gauss_legendre_unit(order)
    u = (np.arange(sub)[:, None] + x[None, :]).ravel() / sub        # points in [0, 1]
    wu = np.tile(w, sub) / sub
    cells = (np.arange(n)[:, None] + u[None, :]) * dt                # (n, P)
    s = res(cells)
    c = s @ wu
    alpha = dt * (s @ (wu * u))          # weight (u - l dt)/dt, for F_i
    beta = dt * (s @ (wu * (1.0 - u)))   # weight ((l+1) dt - u)/dt, for F_{i+1}
    return c, alpha, beta


def solve_mode_resolvents(kernel: MemoryKernel, mu, n_intervals: int = 2000, workers: int = 1):
    mu = np.asarray(mu, dtype=float)

    def one(j):
        return solve_decayed(float(mu[j]), kernel, n_intervals=n_intervals, mode=j + 1)

    return _map(one, range(mu.size), workers)


def _map(fn, items, workers):
    items = list(items)
    if workers is None or workers <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _toeplitz_rows(table, rows):
    """Matrix R[r, i] = table[rows[r] - 1 - i] for i < rows[r], else 0."""
    n = table.size
    i = np.arange(n)
    L = rows[:, None] - 1 - i[None, :]
    return np.where(L >= 0, table[np.clip(L, 0, n - 1)], 0.0)


def _step_count(T, dt):
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise StochasticError(f"horizon {T} is not a multiple of dt={dt}")
    return n


def _output_steps(times, dt):
    times = np.asarray(times, dtype=float)
    m = np.rint(times / dt).astype(int)
    if np.any(np.abs(m * dt - times) > 1e-9 * np.maximum(1.0, times)) or np.any(m < 0):
        raise StochasticError("output times must be nonnegative multiples of dt")
    return m


def _blocks(n_paths):
    return [np.arange(a, min(a + BLOCK, n_paths)) for a in range(0, n_paths, BLOCK)]


def _noise_block(seed, ids, sqrt_lam, c_tables, rows, n, dt):
    """sqrt(lambda_j) sum_i c_{m-1-i} dB_i for m in ``rows``: (len(ids), len(rows), N)."""
    N = sqrt_lam.size
    dB = brownian_increments(seed, ids, N, n, dt)
    out = np.zeros((ids.size, rows.size, N))
    for j in range(N):
        if sqrt_lam[j] == 0.0:
            continue
        R = _toeplitz_rows(c_tables[j], rows)
        out[:, :, j] = sqrt_lam[j] * (dB[:, j, :] @ R.T)
    return out


# ---------------------------------------------------------------------------
# Stochastic convolution
# ---------------------------------------------------------------------------

def sample_stochastic_convolution(spec: NoiseSpec, resolvents: Sequence[ScalarResolvent],
                                  t_grid, workers: int = 1) -> PathEnsemble:
    """Paths of W_A at the requested times (multiples of dt)."""
    times = t_grid.nodes if isinstance(t_grid, TimeGrid) else np.atleast_1d(np.asarray(t_grid, float))
    basis = spec.basis
    if len(resolvents) != basis.N:
        raise StochasticError("one resolvent per mode required")
    rows = _output_steps(times, spec.dt)
    n = max(int(rows.max()), 1)
    sqrt_lam = np.sqrt(basis.lam)
    c_tables = [lag_tables(r, spec.dt, n)[0] for r in resolvents]
    blocks = _blocks(spec.n_paths)
    parts = _map(lambda ids: _noise_block(spec.seed, ids, sqrt_lam, c_tables, rows, n, spec.dt),
                 blocks, workers)
    values = np.concatenate(parts, axis=0)
    return PathEnsemble(times, values, np.arange(spec.n_paths), int(spec.seed), spec.dt)


def analytic_convolution_covariance(resolvents: Sequence[ScalarResolvent], basis: SpectralBasis,
                                    t: float, theta: Optional[float] = None,
                                    delta: Optional[float] = None) -> dict:
    """diag(Q_t)_j = lambda_j int_0^t s_j**2 and its trace."""
    var = np.array([lam * square_integral(r, min(t, r.T)) + (
        lam * r.s[-1] ** 2 * (t - r.T) if t > r.T else 0.0)
        for lam, r in zip(basis.lam, resolvents)])
    out = {"t": float(t), "variances": var, "trace": float(var.sum())}
    if theta is not None and delta is not None:
        out["trace_verdict"] = trace_condition(basis, theta, delta).verdict
    return out


# ---------------------------------------------------------------------------
# Mild solution
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MildRun:
    ensemble: PathEnsemble
    method: str
    windows: list
    gaps: list            # per window: L2(0,T; L2(Omega)) gaps of successive iterates
    sup_gaps: list        # per window: sup-norm gaps
    iterations: list
    lipschitz: dict


def _drift_matrix(alpha, beta, ma, w, rows):
    """Weights of F_{ma..ma+w} in the drift at steps ``rows`` from intervals ma..ma+w-1.

    alpha/beta: (N, n).  Returns (N, len(rows), w + 1).
    """
    n = alpha.shape[1]
    s = np.arange(w + 1)[None, :]
    r = rows[:, None]
    la = r - 1 - ma - s                       # lag for alpha on F_{ma+s}
    lb = r - ma - s                           # lag for beta on F_{ma+s} (interval ma+s-1)
    ma_ok = (s <= w - 1) & (la >= 0)
    mb_ok = (s >= 1) & (lb >= 0)
    A = np.where(ma_ok[None], alpha[:, np.clip(la, 0, n - 1)], 0.0)
    B = np.where(mb_ok[None], beta[:, np.clip(lb, 0, n - 1)], 0.0)
    return A + B


class _Projector:
    def __init__(self, f: NonlinearTerm, N: int, n_phys: int):
        self.f = f
        self.N = N
        self.n_phys = n_phys

    def __call__(self, t, v):
        # v: (..., steps, N); t: (steps,)
        if self.f.is_zero:
            return np.zeros_like(v)
        u = to_physical(v, self.n_phys)
        fu = self.f(t[:, None], u)
        return to_spectral(np.broadcast_to(fu, u.shape), self.N)


def _l2_gap(d, dt):
    return float(math.sqrt(np.mean(np.sum(d * d, axis=(1, 2))) * dt))


def _run_block(ids, ctx):
    (seed, dt, n, t_nodes, lin, sqrt_lam, c_tables, alpha, beta, proj,
     method, win, tol, max_iter) = ctx
    N = lin.shape[0]
    rows = np.arange(n + 1)
    noise = _noise_block(seed, ids, sqrt_lam, c_tables, rows, n, dt)
    v = noise + lin.T[None, :, :]
    drift = np.zeros_like(v)
    F = np.zeros_like(v)
    F[:, 0] = proj(t_nodes[:1], v[:, :1])[:, 0]
    gaps, sup_gaps, iters, windows = [], [], [], []
    ma = 0
    while ma < n:
        w = min(win, n - ma)
        mb = ma + w
        steps = np.arange(ma + 1, mb + 1)
        M = _drift_matrix(alpha, beta, ma, w, steps)          # (N, w, w+1)
        base = v[:, ma + 1:mb + 1] + drift[:, ma + 1:mb + 1]  # linear + noise + past drift
        cur = base.copy()
        g_list, s_list = [], []
        for k in range(max_iter):
            F[:, ma + 1:mb + 1] = proj(t_nodes[ma + 1:mb + 1], cur)
            new = base + np.einsum("bsj,jrs->brj", F[:, ma:mb + 1], M)
            d = new - cur
            g = _l2_gap(d, dt)
            g_list.append(g)
            s_list.append(float(np.max(np.abs(d))) if d.size else 0.0)
            cur = new
            if g <= tol:
                break
            if method == "exp_euler":
                break
            if k >= 1 and g > g_list[-2]:
                raise PicardError(
                    f"Picard iteration stopped contracting on window [{t_nodes[ma]}, {t_nodes[mb]}]",
                    {"window": (float(t_nodes[ma]), float(t_nodes[mb])), "gaps": g_list})
        else:
            raise PicardError(
                f"Picard iteration did not reach tol={tol} in {max_iter} iterations",
                {"window": (float(t_nodes[ma]), float(t_nodes[mb])), "gaps": g_list})
        F[:, ma + 1:mb + 1] = proj(t_nodes[ma + 1:mb + 1], cur)
        v[:, ma + 1:mb + 1] = cur
        if mb < n:
            future = np.arange(mb + 1, n + 1)
            Mf = _drift_matrix(alpha, beta, ma, w, future)
            drift[:, mb + 1:] += np.einsum("bsj,jrs->brj", F[:, ma:mb + 1], Mf)
        gaps.append(g_list)
        sup_gaps.append(s_list)
        iters.append(len(g_list))
        windows.append((float(t_nodes[ma]), float(t_nodes[mb])))
        ma = mb
    return v, gaps, sup_gaps, iters, windows


def simulate_mild_solution(state0: HistoryState, f: NonlinearTerm, spec: NoiseSpec, t_grid,
                           method: str = "picard", *, kernel: MemoryKernel,
                           resolvents: Optional[Sequence[ScalarResolvent]] = None,
                           n_phys: Optional[int] = None, workers: int = 1, tol: float = 1e-8,
                           max_iter: int = 50, T_step: Optional[float] = None,
                           check_f: bool = True) -> MildRun:
    """Paths of v_j(t_m) from the discretized variation-of-parameters identity.

    v = [flow of state0] + sum s(t - tau) f-projection + W_A.  ``picard``
    iterates the implicit trapezoid-type drift rule window by window;
    ``exp_euler`` uses the explicit left-point rule.
    """
    if method not in ("picard", "exp_euler"):
        raise StochasticError("method must be 'picard' or 'exp_euler'")
    basis = spec.basis
    N = basis.N
    if state0.N != N:
        raise StochasticError("state and basis disagree on N")
    lip = f.check() if check_f else {"ok": True}
    if not lip["ok"]:
        raise StochasticError(f"nonlinearity {f.name!r} fails the Lipschitz spot-check: {lip}")
    T = t_grid.T if isinstance(t_grid, TimeGrid) else float(t_grid)
    dt = spec.dt
    n = _step_count(T, dt)
    if n < 4:
        raise StochasticError("need at least 4 time steps")
    t_nodes = np.arange(n + 1) * dt
    mu = basis.mu
    if resolvents is None:
        resolvents = solve_mode_resolvents(kernel, mu, workers=workers)
    tables = [lag_tables(r, dt, n) for r in resolvents]
    c_tables = [tb[0] for tb in tables]
    if method == "exp_euler":
        alpha = np.array([tb[1] + tb[2] for tb in tables])
        beta = np.zeros_like(alpha)
        win = 1
    else:
        alpha = np.array([tb[1] for tb in tables])
        beta = np.array([tb[2] for tb in tables])
        L = max(f.lipschitz_L, 1e-300)
        step = T_step if T_step is not None else min(0.5 / L, 0.1 * T)
        win = max(1, int(round(step / dt)))
    _, lin = evolve_trajectory(T, state0, kernel, mu, dt)
    n_phys = n_phys or max(2 * N, 64)
    proj = _Projector(f, N, n_phys)
    ctx = (int(spec.seed), dt, n, t_nodes, lin, np.sqrt(basis.lam), c_tables, alpha, beta, proj,
           method, win, tol, max_iter)
    blocks = _blocks(spec.n_paths)
    results = _map(lambda ids: _run_block(ids, ctx), blocks, workers)
    values = np.concatenate([r[0] for r in results], axis=0)
    sizes = np.array([b.size for b in blocks], dtype=float)
    windows = results[0][4]
    gaps, sup_gaps, iters = [], [], []
    for w in range(len(windows)):
        depth = max(len(r[1][w]) for r in results)
        g = np.zeros(depth)
        sg = np.zeros(depth)
        for r, sz in zip(results, sizes):
            gw = np.zeros(depth)
            gw[:len(r[1][w])] = r[1][w]
            g += sz * gw**2
            sw = np.zeros(depth)
            sw[:len(r[2][w])] = r[2][w]
            sg = np.maximum(sg, sw)
        gaps.append(np.sqrt(g / sizes.sum()).tolist())
        sup_gaps.append(sg.tolist())
        iters.append(depth)
    ens = PathEnsemble(t_nodes, values, np.arange(spec.n_paths), int(spec.seed), dt)
    return MildRun(ens, method, windows, gaps, sup_gaps, iters, lip)


def _window_rate(g, floor):
    g = [x for x in g if x > floor]
    if len(g) < 2:
        return 0.0, 0.0
    ratios = [b / a for a, b in zip(g[:-1], g[1:])]
    return float((g[-1] / g[0]) ** (1.0 / (len(g) - 1))), float(max(ratios))


def picard_diagnostics(run: MildRun) -> dict:
    """Per-window geometric decay of iterate gaps; rate_estimate is the worst window."""
    if run.method != "picard":
        raise StochasticError("diagnostics need a picard run")
    scale = max(max((max(g) for g in run.gaps if g), default=0.0), 1e-300)
    floor = 1e-13 * scale
    rates = [_window_rate(g, floor) for g in run.gaps]
    sup_rates = [_window_rate(g, 1e-13 * max(max(g, default=0.0), 1e-300)) for g in run.sup_gaps]
    return {
        "iterate_gaps": run.gaps,
        "sup_gaps": run.sup_gaps,
        "window_rates": [r[0] for r in rates],
        "window_max_ratios": [r[1] for r in rates],
        "sup_rates": [r[0] for r in sup_rates],
        "rate_estimate": max((r[0] for r in rates), default=0.0),
        "iterations": run.iterations,
        "windows": run.windows,
    }


# ---------------------------------------------------------------------------
# Raw dumps
# ---------------------------------------------------------------------------

def write_raw_paths(path, ensemble: PathEnsemble):
    """float64 little-endian values behind a one-line JSON header."""
    header = {"shape": list(ensemble.values.shape), "dtype": "<f8", "seed": ensemble.seed,
              "dt": ensemble.dt, "times": [float(t) for t in ensemble.times]}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(np.ascontiguousarray(ensemble.values, dtype="<f8").tobytes())


def read_raw_paths(path):
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
        data = np.frombuffer(fh.read(), dtype=header["dtype"]).reshape(header["shape"])
    return header, data

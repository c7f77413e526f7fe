"""Scalar resolvents s + mu (k * s) = 1, fourth order in time.

Convolutions with k1 use product integration: the unknown is interpolated
by piecewise cubics (four-node Lagrange stencils, centred where possible,
one-sided on the newest interval) and k1 is integrated against each
stencil polynomial by Gauss rules.  On the interval touching the diagonal
the weakly singular factor of k1 goes into a Gauss-Jacobi weight, so k1 is
never sampled at 0.

Time stepping uses the differentiated equation v' = -mu k0 v - mu k1*v + g'
with the k0 term integrated exactly.  Plain product integration of the
creep form is only stable for mu k0 h below about 1.3, which the stiff
high modes violate.  The creep-form weights are kept for residual checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from ._quad import gauss_jacobi_unit, gauss_legendre_unit, graded_nodes
from .kernels import MemoryKernel, laplace_k

__all__ = [
    "ResolventError",
    "TimeGrid",
    "VolterraWeights",
    "CubicInterpolant",
    "ScalarResolvent",
    "volterra_weights",
    "solve_volterra",
    "solve_scalar_resolvent",
    "solve_decayed",
    "resolvent_derivative",
    "estimate_suite",
    "abs_integral",
    "laplace_transform",
    "laplace_identity_residual",
    "double_square_integral",
    "square_integral",
    "fit_power_law",
    "ordering_violations",
    "default_grading",
]

GAUSS_ORDER = 8
DECAY_TOL = 1e-8
TRUNCATION_FLAG = 1e-6


class ResolventError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class TimeGrid:
    nodes: np.ndarray
    grading: float = 1.0

    def __post_init__(self):
        t = np.asarray(self.nodes, dtype=float)
        if t.ndim != 1 or t.size < 5:
            raise ResolventError("time grid needs at least 5 nodes")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ResolventError("time grid must start at 0 and increase strictly")
        object.__setattr__(self, "nodes", t)

    @classmethod
    def uniform(cls, T: float, n_intervals: int) -> "TimeGrid":
        return cls(np.linspace(0.0, T, n_intervals + 1), 1.0)

    @classmethod
    def graded(cls, T: float, n_intervals: int, grading: float) -> "TimeGrid":
        return cls(graded_nodes(T, n_intervals, grading), grading)

    @property
    def T(self) -> float:
        return float(self.nodes[-1])

    @property
    def n(self) -> int:
        """Number of intervals."""
        return self.nodes.size - 1

    @property
    def is_uniform(self) -> bool:
        h = np.diff(self.nodes)
        return bool(np.allclose(h, h[0], rtol=1e-12, atol=0.0))


def default_grading(kernel: MemoryKernel) -> float:
    return max(1.0, 2.0 / (1.0 - kernel.singularity_exponent))


# ---------------------------------------------------------------------------
# Lagrange stencils
# ---------------------------------------------------------------------------

def _lagrange_basis(stencil_nodes, x):
    """Values of the 4 Lagrange basis polynomials at points x -> (len(x), 4)."""
    xs = stencil_nodes
    out = np.ones((x.size, xs.size))
    for m in range(xs.size):
        for r in range(xs.size):
            if r != m:
                out[:, m] *= (x - xs[r]) / (xs[m] - xs[r])
    return out


def _central_lo(i, n):
    """Left node of the stencil used on interval i (nodes i-1, i)."""
    return np.clip(np.asarray(i) - 2, 0, n - 3)


class CubicInterpolant:
    """Piecewise-cubic interpolant matching the solver's stencils."""

    def __init__(self, nodes, values):
        self.nodes = np.asarray(nodes, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.nodes.size < 4:
            raise ResolventError("need at least 4 nodes")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        t, v = self.nodes, self.values
        n = t.size - 1
        i = np.clip(np.searchsorted(t, flat, side="right"), 1, n)
        lo = _central_lo(i, n)
        idx = lo[:, None] + np.arange(4)[None, :]
        xs = t[idx]
        ys = v[..., idx] if v.ndim > 1 else v[idx]
        basis = np.ones((flat.size, 4))
        for m in range(4):
            for r in range(4):
                if r != m:
                    basis[:, m] *= (flat - xs[:, r]) / (xs[:, m] - xs[:, r])
        out = np.sum(basis * ys, axis=-1)
        return out.reshape(v.shape[:-1] + x.shape) if v.ndim > 1 else out.reshape(x.shape)


def gauss_samples(nodes, upto: Optional[float] = None, order: int = GAUSS_ORDER):
    """Gauss points and weights on every grid interval inside [0, upto]."""
    t = np.asarray(nodes, dtype=float)
    if upto is not None:
        k = int(np.searchsorted(t, upto, side="left"))
        t = np.concatenate([t[:k], [upto]]) if upto > t[k - 1] else t[:k]
    a, b = t[:-1], t[1:]
    x, w = gauss_legendre_unit(order)
    pts = a[:, None] + (b - a)[:, None] * x[None, :]
    wts = (b - a)[:, None] * w[None, :]
    return pts.ravel(), wts.ravel()


# ---------------------------------------------------------------------------
# Weights
# ---------------------------------------------------------------------------

class VolterraWeights:
    """Product-integration weights on one grid.

    Row n of ``V`` gives (k1 * v)(t_n) ~ sum_m V[n, m] v_m.  ``W`` does the
    same for the creep function k = k0 + K1 and is only built on demand,
    since the solver needs it only for residual checks.
    """

    def __init__(self, grid: TimeGrid, kernel: MemoryKernel, order: int = GAUSS_ORDER):
        self.grid = grid
        self.kernel = kernel
        self.order = order
        self.V = _build_rows(kernel, grid, order, "k1")
        self._W = None

    @property
    def W(self) -> np.ndarray:
        if self._W is None:
            self._W = _build_rows(self.kernel, self.grid, self.order, "k")
        return self._W


def _stencil_tables(t, order):
    """Per-interval Gauss data and basis values for central and start-up stencils."""
    n = t.size - 1
    i = np.arange(1, n + 1)
    h = t[1:] - t[:-1]
    xg, wg = gauss_legendre_unit(order)
    u = t[:-1, None] + h[:, None] * xg[None, :]            # (n, Q)
    tables = {}
    for name, lo in (("c", _central_lo(i, n)), ("s", np.zeros(n, dtype=int))):
        xs = t[lo[:, None] + np.arange(4)[None, :]]        # (n, 4)
        B = np.ones((n, order, 4))
        for m in range(4):
            for r in range(4):
                if r != m:
                    B[:, :, m] *= (u - xs[:, None, r]) / (xs[:, None, m] - xs[:, None, r])
        tables[name] = (lo, B)
    return u, h[:, None] * wg[None, :], tables


def _end_lo(N):
    return 0 if N <= 3 else N - 3


def _end_basis(t, N, x_unit, lo):
    """Basis values at points t_N - h_N * x_unit for the stencil starting at lo."""
    h = t[N] - t[N - 1]
    return _lagrange_basis(t[lo:lo + 4], t[N] - h * x_unit)


def _row_contrib(kvals, wts, B):
    # kvals, wts: (m, Q); B: (m, Q, 4) -> (m, 4)
    return np.einsum("iq,iqk->ik", kvals * wts, B)


def _assemble_row(row, lo, C):
    for m in range(4):
        np.add.at(row, lo + m, C[:, m])


@lru_cache(maxsize=8)
def _weights_cached(kernel: MemoryKernel, grid: TimeGrid, order: int):
    return VolterraWeights(grid, kernel, order)


def volterra_weights(kernel: MemoryKernel, grid: TimeGrid, order: int = GAUSS_ORDER,
                     cache: bool = True) -> VolterraWeights:
    if cache:
        return _weights_cached(kernel, grid, order)
    return VolterraWeights(grid, kernel, order)


def _build_rows(kernel: MemoryKernel, grid: TimeGrid, order: int, which: str) -> np.ndarray:
    """Weights for k1 (``which='k1'``) or k = k0 + K1 (``which='k'``)."""
    t = grid.nodes
    n = grid.n
    gam = kernel.singularity_exponent
    out = np.zeros((n + 1, n + 1))
    has_memory = not kernel.is_zero
    if which == "k1" and not has_memory:
        out.flags.writeable = False
        return out
    u, wq, tables = _stencil_tables(t, order)
    lo_c, Bc = tables["c"]
    lo_s, Bs = tables["s"]
    xg, wg = gauss_legendre_unit(order)
    if which == "k1":
        # near the diagonal: k1(x) = x**-gam * g(x), Jacobi weight x**-gam
        xe, we = gauss_jacobi_unit(order, -gam) if gam > 0 else (xg, wg)
        power = 1.0 - gam

        def f_end(x):
            return kernel.regular_part(x) if gam > 0 else kernel.density(x)

        f_far = kernel.density
    else:
        # K1(x) = x**(1 - gam) * G(x); the k0 part is a polynomial
        xe, we = gauss_jacobi_unit(order, 1.0 - gam) if gam > 0 else (xg, wg)
        power = 2.0 - gam if gam > 0 else 1.0

        def f_end(x):
            if not has_memory:
                return np.zeros_like(x)
            K = kernel.antiderivative(x)
            return K / x ** (1.0 - gam) if gam > 0 else K

        def f_far(x):
            return kernel.k0 + (kernel.antiderivative(x) if has_memory else 0.0)

    uniform = grid.is_uniform
    if uniform:
        h0 = t[1] - t[0]
        # interval i seen from node N depends on the lag N - i only
        lags = np.arange(1, n)[:, None] * h0 + h0 * (1.0 - xg)[None, :]
        f_lag = f_far(lags) * np.ones_like(lags)

    for N in range(1, n + 1):
        start = N <= 3
        row = out[N]
        h_N = t[N] - t[N - 1]
        if N > 1:
            ii = slice(0, N - 1)
            vals = f_lag[N - 2::-1] if uniform else f_far(t[N] - u[ii]) * np.ones((N - 1, order))
            lo, B = (lo_s, Bs) if start else (lo_c, Bc)
            _assemble_row(row, lo[ii], _row_contrib(vals, wq[ii], B[ii]))
        lo_N = _end_lo(N)
        Be = _end_basis(t, N, xe, lo_N)
        row[lo_N:lo_N + 4] += h_N ** power * ((we * f_end(h_N * xe)) @ Be)
        if which == "k" and kernel.k0 != 0.0:
            row[lo_N:lo_N + 4] += kernel.k0 * h_N * (wg @ _end_basis(t, N, xg, lo_N))
    out.flags.writeable = False
    return out


# ---------------------------------------------------------------------------
# Solving
# ---------------------------------------------------------------------------

def _exp_moments(z, p_max=3):
    """I_p(z) = int_0^1 e^{-z y} y^p dy for p = 0..p_max, z >= 0."""
    z = float(z)
    if z < 4.0:
        y, w = gauss_legendre_unit(24)
        e = w * np.exp(-z * y)
        return np.array([e @ y**p for p in range(p_max + 1)])
    ez = math.exp(-z)
    out = [(1.0 - ez) / z]
    for p in range(1, p_max + 1):
        out.append((p * out[-1] - ez) / z)
    return np.array(out)


def _exp_step_weights(t, N, a):
    """Weights E_j with int e^{-a (t_N - tau)} f(tau) dtau ~ sum_j E_j f(t_{lo + j}).

    The integral runs over the last interval, or over [0, t_N] during
    start-up, with f replaced by its cubic interpolant on four nodes.
    """
    lo = _end_lo(N)
    left = 0.0 if N <= 3 else t[N - 1]
    L = t[N] - left
    # stencil nodes in y = (t_N - tau) / L; expand each basis cubic in powers of y
    y_nodes = (t[N] - t[lo:lo + 4]) / L
    coeffs = np.linalg.inv(np.vander(y_nodes, 4, increasing=True))   # (power, basis)
    I = _exp_moments(a * L)
    return lo, L * (I @ coeffs), math.exp(-a * L)


def solve_volterra(mu: float, weights: VolterraWeights, rhs, rhs_prime=None) -> np.ndarray:
    """Nodal solution of v + mu (k * v) = g on the weights' grid.

    The equation is integrated in its differentiated form
    v' = -mu k0 v - mu (k1 * v) + g', v(0) = g(0), treating the k0 term
    exactly (exponential integrator) and the memory term as a cubic forcing.
    This keeps the scheme stable for any mu k0 h.

    ``rhs`` is either a scalar/batch of constants (then g' = 0) or nodal
    values g with time on the last axis, in which case ``rhs_prime`` must
    give g' at the nodes.  Leading batch axes are allowed.
    """
    V = weights.V
    t = weights.grid.nodes
    n = t.size - 1
    a = mu * weights.kernel.k0
    g = np.asarray(rhs, dtype=float)
    if rhs_prime is None:
        if g.ndim and g.shape[-1] == n + 1 and np.ptp(g, axis=-1).max(initial=0.0) > 0:
            raise ResolventError("time-dependent right-hand side needs rhs_prime")
        g0 = g[..., 0] if (g.ndim and g.shape[-1] == n + 1) else g
        gp = np.zeros(np.shape(g0) + (n + 1,))
    else:
        g0 = g[..., 0] if (g.ndim and g.shape[-1] == n + 1) else g
        gp = np.broadcast_to(np.asarray(rhs_prime, dtype=float), np.shape(g0) + (n + 1,))
    batch = np.shape(g0)
    v = np.zeros(batch + (n + 1,))
    m = np.zeros(batch + (n + 1,))          # memory term (k1 * v)(t_j)
    v[..., 0] = g0
    # start-up: v_1..v_3 coupled through the shared cubic on nodes 0..3
    A = np.eye(3)
    b = np.zeros(batch + (3,))
    for r, N in enumerate((1, 2, 3)):
        lo, E, decay = _exp_step_weights(t, N, a)
        b[..., r] = decay * v[..., 0] + E @ np.moveaxis(gp[..., 0:4], -1, 0)
        # - mu * sum_j E_j m_j with m_j = sum_l V[j, l] v_l, l = 0..3
        M = mu * (E @ V[0:4, 0:4])          # coefficients on v_0..v_3
        b[..., r] -= M[0] * v[..., 0]
        A[r] += M[1:4]
    try:
        v[..., 1:4] = np.linalg.solve(A, b[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise ResolventError("singular start-up block at nodes 1..3") from exc
    m[..., :4] = v[..., :4] @ V[:4, :4].T
    uniform = weights.grid.is_uniform
    for N in range(4, n + 1):
        if N == 4 or not uniform:
            _, E, decay = _exp_step_weights(t, N, a)
        lo = N - 3
        m_prev = v[..., :N] @ V[N, :N]
        forcing = (gp[..., lo:lo + 4] - mu * m[..., lo:lo + 4]) @ E
        # the m_N slot above used m[..., N] = 0; add its explicit part now
        rhs_N = decay * v[..., N - 1] + forcing - mu * E[3] * m_prev
        denom = 1.0 + mu * E[3] * V[N, N]
        if not abs(denom) > 1e-14:
            raise ResolventError(f"ill-conditioned weight at node {N}")
        v[..., N] = rhs_N / denom
        m[..., N] = m_prev + V[N, N] * v[..., N]
    if not np.all(np.isfinite(v)):
        bad = int(np.argmax(~np.isfinite(v).reshape(-1, n + 1).all(axis=0)))
        raise ResolventError(f"non-finite solution at node {bad}")
    return v


def solve_with_derivative(mu: float, weights: VolterraWeights, rhs, rhs_prime=None):
    """Like :func:`solve_volterra` but also returns v' at the nodes."""
    v = solve_volterra(mu, weights, rhs, rhs_prime)
    gp = 0.0 if rhs_prime is None else np.asarray(rhs_prime, dtype=float)
    vp = -mu * (weights.kernel.k0 * v + v @ weights.V.T) + gp
    return v, vp


def discrete_residual(mu: float, weights: VolterraWeights, v, rhs) -> np.ndarray:
    return v + mu * (weights.W @ v) - rhs


@dataclass(frozen=True, eq=False)
class ScalarResolvent:
    mode: int
    mu: float
    grid: TimeGrid
    s: np.ndarray
    s_prime: np.ndarray
    kernel: MemoryKernel
    residual: float = float("nan")
    truncated: bool = False

    @property
    def T(self) -> float:
        return self.grid.T

    def interpolant(self) -> CubicInterpolant:
        return CubicInterpolant(self.grid.nodes, self.s)

    def derivative_interpolant(self) -> CubicInterpolant:
        return CubicInterpolant(self.grid.nodes, self.s_prime)

    def __call__(self, t):
        """s(t) by cubic interpolation; zero-order hold beyond the horizon."""
        t = np.asarray(t, dtype=float)
        inside = np.minimum(t, self.T)
        return self.interpolant()(inside)


def solve_scalar_resolvent(mu: float, kernel: MemoryKernel, grid: TimeGrid, mode: int = 0,
                           weights: Optional[VolterraWeights] = None,
                           check_residual: bool = False) -> ScalarResolvent:
    """Solve s + mu (k * s) = 1 on ``grid``.

    With ``check_residual`` the undifferentiated equation is re-evaluated
    with independent creep-form weights and max_n |r_n| is stored.
    """
    if mu < 0:
        raise ResolventError("mu must be nonnegative")
    weights = weights or volterra_weights(kernel, grid)
    s, sp = solve_with_derivative(mu, weights, 1.0)
    res = float("nan")
    if check_residual:
        res = float(np.max(np.abs(discrete_residual(mu, weights, s, 1.0))))
    tail = np.max(np.abs(s[grid.nodes >= 0.9 * grid.T]))
    return ScalarResolvent(mode, float(mu), grid, s, sp, kernel, res, bool(tail > TRUNCATION_FLAG))


def resolvent_derivative(res: ScalarResolvent) -> np.ndarray:
    return res.s_prime


def solve_decayed(mu: float, kernel: MemoryKernel, n_intervals: int = 2000, mode: int = 0,
                  cap: Optional[float] = None, tol: float = DECAY_TOL,
                  T0: Optional[float] = None) -> ScalarResolvent:
    """Solve on a graded grid whose horizon is doubled until |s| < tol at its end.

    The first horizon is the exponential proxy log(1/tol)/(mu k0).  Memory
    slows the decay independently of mu, so ``cap`` defaults to
    max(50/(mu k0), 50).
    """
    if mu <= 0:
        grid = TimeGrid.graded(T0 or 1.0, n_intervals, default_grading(kernel))
        return solve_scalar_resolvent(mu, kernel, grid, mode)
    cap = cap if cap is not None else max(50.0 / (mu * kernel.k0), 50.0)
    T = T0 if T0 is not None else min(math.log(1.0 / tol) / (mu * kernel.k0), cap)
    grading = default_grading(kernel)

    def attempt(T, n):
        grid = TimeGrid.graded(T, n, grading)
        res = solve_scalar_resolvent(mu, kernel, grid, mode,
                                     weights=volterra_weights(kernel, grid, cache=False))
        return res, float(np.max(np.abs(res.s[grid.nodes >= 0.9 * T])))

    # locate the horizon on a coarse grid, then solve once at full resolution
    probe = min(256, n_intervals)
    while T < cap:
        _, tail = attempt(T, probe)
        if tail < tol:
            break
        T = min(2.0 * T, cap)
    while True:
        res, tail = attempt(T, n_intervals)
        if tail < tol or T >= cap:
            return ScalarResolvent(mode, res.mu, res.grid, res.s, res.s_prime, kernel,
                                   res.residual, bool(tail > TRUNCATION_FLAG))
        T = min(2.0 * T, cap)


# ---------------------------------------------------------------------------
# Functionals of a solved resolvent
# ---------------------------------------------------------------------------

def abs_integral(nodes, values, weight=None, order: int = GAUSS_ORDER) -> float:
    """int |f| w over the grid for the cubic interpolant f of ``values``.

    Intervals where f changes sign are split at its roots so the kink of
    |f| does not cost accuracy.
    """
    t = np.asarray(nodes, dtype=float)
    f = CubicInterpolant(t, values)
    w_fn = weight or (lambda x: np.ones_like(x))
    pts, wts = gauss_samples(t, order=order)
    vals = np.abs(f(pts)) * w_fn(pts)
    Q = gauss_legendre_unit(order)[0].size
    per = (wts * vals).reshape(-1, Q).sum(axis=1)
    # sign changes between consecutive samples (nodes and Gauss points)
    fp = f(pts).reshape(-1, Q)
    fv = np.asarray(values, dtype=float)
    samples = np.concatenate([fv[:-1, None], fp, fv[1:, None]], axis=1)
    flips = np.nonzero(np.any(samples[:, :-1] * samples[:, 1:] < 0, axis=1))[0]
    n = t.size - 1
    xg, wg = gauss_legendre_unit(order)
    for i in flips:
        a, b = t[i], t[i + 1]
        lo = int(_central_lo(i + 1, n))
        xs = t[lo:lo + 4]
        c = np.polyfit(xs - a, fv[lo:lo + 4], 3)
        roots = np.roots(c)
        roots = np.sort(roots[np.isreal(roots)].real) + a
        cuts = np.concatenate([[a], roots[(roots > a) & (roots < b)], [b]])
        total = 0.0
        for l, r in zip(cuts[:-1], cuts[1:]):
            x = l + (r - l) * xg
            total += (r - l) * (wg @ (np.abs(f(x)) * w_fn(x)))
        per[i] = total
    return float(per.sum())


def estimate_suite(res: ScalarResolvent) -> dict:
    """sup|s|, int|s'|, int t|s'|, int|s| over the solved horizon."""
    pts, _ = gauss_samples(res.grid.nodes)
    t = res.grid.nodes
    return {
        "sup_s": float(max(np.max(np.abs(res.s)), np.max(np.abs(res.interpolant()(pts))))),
        "int_abs_sprime": abs_integral(t, res.s_prime),
        "int_t_sprime": abs_integral(t, res.s_prime, weight=lambda x: x),
        "int_abs_s": abs_integral(t, res.s),
        "horizon": res.T,
        "truncated": bool(res.truncated),
    }


def laplace_transform(res: ScalarResolvent, lam: complex) -> complex:
    """int_0^T e^{-lam t} s dt plus the flat-extrapolation tail e^{-lam T} s(T)/lam."""
    pts, wts = gauss_samples(res.grid.nodes)
    s = res.interpolant()(pts)
    head = wts @ (np.exp(-lam * pts) * s)
    return complex(head + np.exp(-lam * res.T) * res.s[-1] / lam)


def laplace_identity_residual(res: ScalarResolvent, kernel: MemoryKernel, lam,
                              literal: bool = False) -> float:
    """|lam s^(lam) (1 + mu k^(lam)) - 1|.

    This is the transformed resolvent equation s^ + mu k^ s^ = 1/lam.
    ``literal=True`` evaluates |lam s^ (lam + mu k^) - 1| instead, which only
    vanishes at lam = 1.
    """
    lam = complex(lam)
    if lam.real <= 0:
        raise ResolventError("need Re(lambda) > 0")
    s_hat = laplace_transform(res, lam)
    k_hat = laplace_k(kernel, lam)
    if literal:
        return float(abs(lam * s_hat * (lam + res.mu * k_hat) - 1.0))
    return float(abs(lam * s_hat * (1.0 + res.mu * k_hat) - 1.0))


def square_integral(res: ScalarResolvent, t: float) -> float:
    """int_0^t s(sigma)**2 d sigma."""
    if t <= 0:
        return 0.0
    if t > res.T * (1 + 1e-12):
        raise ResolventError("t beyond the resolvent horizon")
    pts, wts = gauss_samples(res.grid.nodes, upto=min(t, res.T))
    return float(wts @ res.interpolant()(pts) ** 2)


def double_square_integral(res: ScalarResolvent, T: float) -> float:
    """int_0^T int_0^tau s(sigma)**2 d sigma d tau = int_0^T (T - sigma) s**2."""
    if T > res.T * (1 + 1e-12):
        raise ResolventError("T beyond the resolvent horizon")
    pts, wts = gauss_samples(res.grid.nodes, upto=min(T, res.T))
    return float(wts @ ((T - pts) * res.interpolant()(pts) ** 2))


def ordering_violations(resolvents, tol: float = 1e-12) -> list:
    """(t, mode_a, mode_b) where mu_a < mu_b but s_a(t) < s_b(t) - tol.

    Resolvents must share a grid.  Only the first violating node of each
    adjacent pair is listed.
    """
    rs = sorted(resolvents, key=lambda r: r.mu)
    out = []
    for a, b in zip(rs[:-1], rs[1:]):
        if not np.array_equal(a.grid.nodes, b.grid.nodes):
            raise ResolventError("ordering check needs a common grid")
        bad = np.flatnonzero(a.s < b.s - tol)
        if a.mu < b.mu and bad.size:
            out.append((float(a.grid.nodes[bad[0]]), a.mode, b.mode))
    return out


def fit_power_law(mu, values) -> float:
    """Least-squares slope of log(values) against log(mu)."""
    mu = np.asarray(mu, dtype=float)
    values = np.asarray(values, dtype=float)
    slope, _ = np.polyfit(np.log(mu), np.log(values), 1)
    return float(slope)

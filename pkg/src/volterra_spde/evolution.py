"""History states (v, eta) in spectral coordinates and the linear flow on them.

A state stores, per mode j, the current coefficient v_j and the past
profile eta_j(s) = v_j(t - s) sampled on positive lags.  Lag integrals use
piecewise cubics on the lag nodes, extrapolated on [0, s_1], with stencils
that never straddle a declared break (the seam at s = t left behind by a
flow step, where eta is continuous but its slope jumps).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._quad import gauss_jacobi_unit, gauss_legendre_unit
from .kernels import MemoryKernel, rho as kernel_rho
from .resolvent import (
    ResolventError,
    ScalarResolvent,
    TimeGrid,
    CubicInterpolant,
    gauss_samples,
    solve_volterra,
    volterra_weights,
)

__all__ = [
    "EvolutionError",
    "HistoryState",
    "HistoryRule",
    "default_history_grid",
    "history_rule",
    "energy_norm",
    "energy_distance",
    "history_forcing",
    "semigroup_apply",
    "variation_of_parameters",
    "evolve_trajectory",
    "quasi_dissipativity_form",
    "lambda_zero",
    "random_admissible_state",
    "smooth_test_state",
]

ORDER = 8
DEFAULT_DT = 1e-3


class EvolutionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class HistoryState:
    v: np.ndarray
    eta: np.ndarray
    history_grid: np.ndarray
    breaks: tuple = ()

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.v, dtype=float))
        eta = np.atleast_2d(np.asarray(self.eta, dtype=float))
        s = np.asarray(self.history_grid, dtype=float)
        if s.ndim != 1 or s.size < 4:
            raise EvolutionError("history grid needs at least 4 lags")
        if s[0] <= 0 or np.any(np.diff(s) <= 0):
            raise EvolutionError("history lags must be positive and increasing")
        if eta.shape != (v.size, s.size):
            raise EvolutionError(f"eta must have shape {(v.size, s.size)}, got {eta.shape}")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "history_grid", s)
        object.__setattr__(self, "breaks", tuple(sorted(float(b) for b in self.breaks)))

    @property
    def N(self) -> int:
        return self.v.size

    def eta_at_zero(self) -> np.ndarray:
        """Cubic extrapolation of eta to s = 0 from the first four lags."""
        return CubicInterpolant(self.history_grid[:4], self.eta[:, :4])(np.array([0.0]))[..., 0]

    def domain_gap(self) -> float:
        """max_j |eta_j(0+) - v_j|, the defect in the domain condition eta(0) = v."""
        return float(np.max(np.abs(self.eta_at_zero() - self.v)))

    def scaled(self, c: float) -> "HistoryState":
        return HistoryState(c * self.v, c * self.eta, self.history_grid, self.breaks)


def default_history_grid(kernel: MemoryKernel, s_min: float = 1e-3, ratio: float = 1.02,
                         h_max: float = 0.05, tol: float = 1e-8) -> np.ndarray:
    """Lags s_min * ratio**i, spacing capped at ``h_max``, up to S_max.

    S_max is the first power of two with rho(S_max) < tol * rho(0).
    """
    r0 = float(kernel_rho(kernel, 0.0))
    s_max = 1.0
    if r0 > 0.0:
        while float(kernel_rho(kernel, s_max)) >= tol * r0 and s_max < 1e4:
            s_max *= 2.0
    # geometric until the step reaches h_max, then uniform
    s_switch = min(h_max / (ratio - 1.0), s_max)
    n_geo = int(math.floor(math.log(s_switch / s_min) / math.log(ratio)))
    geo = s_min * ratio ** np.arange(n_geo + 1)
    n_uni = int(math.ceil((s_max - geo[-1]) / h_max))
    uni = geo[-1] + h_max * np.arange(1, n_uni + 1)
    return np.concatenate([geo, uni])


# ---------------------------------------------------------------------------
# Lag quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class HistoryRule:
    """Gauss points on [0, s_M] with sparse cubic interpolation weights.

    ``value(eta)`` and ``slope(eta)`` map nodal rows to samples at ``points``.
    The head interval [0, s_1] has a second, Jacobi-weighted rule so that
    integrals against a weakly singular k1 stay accurate.
    """

    points: np.ndarray
    weights: np.ndarray
    idx: np.ndarray
    coef: np.ndarray
    dcoef: np.ndarray
    head_points: np.ndarray
    head_weights: np.ndarray          # already include the x**-gamma factor
    head_idx: np.ndarray
    head_coef: np.ndarray
    n_head: int                       # number of regular points on [0, s_1]

    def value(self, eta):
        return np.sum(np.asarray(eta)[..., self.idx] * self.coef, axis=-1)

    def slope(self, eta):
        return np.sum(np.asarray(eta)[..., self.idx] * self.dcoef, axis=-1)

    def head_value(self, eta):
        return np.sum(np.asarray(eta)[..., self.head_idx] * self.head_coef, axis=-1)


def _segment_bounds(s, breaks):
    """(first, last) node indices of the smooth segments of the lag grid."""
    cuts = [0]
    for b in breaks:
        k = int(np.searchsorted(s, b))
        if k < s.size and abs(s[k] - b) <= 1e-12 * max(1.0, b) and 0 < k < s.size - 1:
            cuts.append(k)
    cuts.append(s.size - 1)
    segs = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a < 3:
            # too short for a cubic: merge into the previous segment
            if segs:
                segs[-1] = (segs[-1][0], b)
                continue
        segs.append((a, b))
    if len(segs) > 1 and segs[-1][1] - segs[-1][0] < 3:
        last = segs.pop()
        segs[-1] = (segs[-1][0], last[1])
    return segs


def _lagrange_and_slope(xs, x):
    """Basis values and derivatives, xs (P, 4), x (P,)."""
    P = x.size
    L = np.ones((P, 4))
    D = np.zeros((P, 4))
    for m in range(4):
        others = [r for r in range(4) if r != m]
        denom = np.ones(P)
        for r in others:
            denom *= xs[:, m] - xs[:, r]
        num = np.ones(P)
        for r in others:
            num *= x - xs[:, r]
        L[:, m] = num / denom
        dsum = np.zeros(P)
        for r in others:
            term = np.ones(P)
            for q in others:
                if q != r:
                    term *= x - xs[:, q]
            dsum += term
        D[:, m] = dsum / denom
    return L, D


def history_rule(history_grid, breaks=(), kernel: Optional[MemoryKernel] = None,
                 order: int = ORDER) -> HistoryRule:
    s = np.asarray(history_grid, dtype=float)
    segs = _segment_bounds(s, breaks)
    left = np.concatenate([[0.0], s[:-1]])
    right = s
    # stencil for interval [left_i, right_i]; interval 0 is the head [0, s_0]
    lo = np.zeros(s.size, dtype=int)
    for a, b in segs:
        for i in range(max(a, 0) + 1, b + 1):
            lo[i] = min(max(i - 2, a), b - 3)
    lo[0] = 0
    xg, wg = gauss_legendre_unit(order)
    h = right - left
    pts = (left[:, None] + h[:, None] * xg[None, :])
    wts = h[:, None] * wg[None, :]
    idx = lo[:, None] + np.arange(4)[None, :]
    idx_p = np.repeat(idx, order, axis=0)
    L, D = _lagrange_and_slope(s[idx_p], pts.ravel())
    gam = kernel.singularity_exponent if kernel is not None else 0.0
    if gam > 0:
        xj, wj = gauss_jacobi_unit(order, -gam)
        hp = s[0] * xj
        hw = s[0] ** (1.0 - gam) * wj * kernel.regular_part(hp)
    else:
        hp = s[0] * xg
        hw = s[0] * wg * (kernel.density(hp) if kernel is not None and not kernel.is_zero
                          else np.zeros_like(hp))
    hidx = np.repeat(idx[:1], order, axis=0)
    HL, _ = _lagrange_and_slope(s[hidx], hp)
    return HistoryRule(pts.ravel(), wts.ravel(), idx_p, L, D, hp, hw, hidx, HL, order)


def _rule_for(state: HistoryState, kernel: MemoryKernel) -> HistoryRule:
    return history_rule(state.history_grid, state.breaks, kernel)


def _rho_at(kernel, x):
    if kernel.is_zero:
        return np.zeros_like(x)
    return np.asarray(kernel.rho(x), dtype=float)


def energy_norm(state: HistoryState, kernel: MemoryKernel, mu) -> float:
    """sqrt(sum v_j**2 + sum mu_j int rho eta_j**2)."""
    mu = np.asarray(mu, dtype=float)
    rule = _rule_for(state, kernel)
    eq = rule.value(state.eta)
    hist = (eq**2 * rule.weights) @ _rho_at(kernel, rule.points)
    return float(math.sqrt(state.v @ state.v + mu @ hist))


def energy_distance(a: HistoryState, b: HistoryState, kernel: MemoryKernel, mu) -> float:
    """Energy norm of a - b; both states must share lag nodes."""
    if a.history_grid.shape != b.history_grid.shape or \
            not np.allclose(a.history_grid, b.history_grid, rtol=1e-12, atol=1e-14):
        raise EvolutionError("states live on different lag grids")
    breaks = tuple(sorted(set(a.breaks) | set(b.breaks)))
    diff = HistoryState(a.v - b.v, a.eta - b.eta, a.history_grid, breaks)
    return energy_norm(diff, kernel, mu)


# ---------------------------------------------------------------------------
# Forcing from the initial history
# ---------------------------------------------------------------------------

def history_forcing(state0: HistoryState, kernel: MemoryKernel, t_grid, mu,
                    kernel_part: str = "k1", chunk: int = 256) -> np.ndarray:
    """h_j(t) = -mu_j int_0^inf k1(t + sigma) eta_j(sigma) d sigma at the grid nodes.

    ``kernel_part='k'`` uses the full creep function k = k0 + K1 instead of
    its density; this variant does not generate a flow and exists only for
    comparison.  Returns an array of shape (N, len(nodes)).
    """
    nodes = t_grid.nodes if isinstance(t_grid, TimeGrid) else np.asarray(t_grid, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if kernel_part not in ("k1", "k"):
        raise EvolutionError("kernel_part must be 'k1' or 'k'")
    out = np.zeros((state0.N, nodes.size))
    if not np.any(state0.eta):
        return out
    rule = _rule_for(state0, kernel)
    # drop the regular head points; the head is handled per row below
    body = slice(rule.n_head, None)
    pts = rule.points[body]
    weq = rule.value(state0.eta)[:, body] * rule.weights[body]
    head_pts = rule.points[:rule.n_head]
    head_weq = rule.value(state0.eta)[:, :rule.n_head] * rule.weights[:rule.n_head]
    for a in range(0, nodes.size, chunk):
        tau = nodes[a:a + chunk]
        if kernel_part == "k1":
            if kernel.is_zero:
                continue
            kb = kernel.density(tau[:, None] + pts[None, :])
            pos = tau > 0
            kh = np.zeros((tau.size, head_pts.size))
            kh[pos] = kernel.density(tau[pos, None] + head_pts[None, :])
        else:
            kb = kernel.k(tau[:, None] + pts[None, :])
            kh = kernel.k(tau[:, None] + head_pts[None, :])
        block = weq @ kb.T + head_weq @ kh.T
        if kernel_part == "k1":
            zero = np.nonzero(tau == 0)[0]
            if zero.size:
                # singular head at t = 0: Jacobi-weighted rule
                block[:, zero] += (rule.head_value(state0.eta) @ rule.head_weights)[:, None]
        out[:, a:a + chunk] = block
    return -mu[:, None] * out


def _history_tail_flag(state: HistoryState, kernel: MemoryKernel) -> bool:
    r_end = float(_rho_at(kernel, np.array([state.history_grid[-1]]))[0])
    r0 = float(_rho_at(kernel, np.array([0.0]))[0])
    scale = max(np.max(np.abs(state.eta)), 1e-300)
    return bool(r_end * np.max(np.abs(state.eta[:, -1])) > 1e-8 * max(r0, 1e-300) * scale)


# ---------------------------------------------------------------------------
# The flow
# ---------------------------------------------------------------------------

def _flow_grid(t, dt):
    n = max(4, int(math.ceil(t / dt - 1e-9)))
    return TimeGrid.uniform(t, n)


def _mode_mu(resolvents, mu):
    if mu is not None:
        return np.asarray(mu, dtype=float)
    return np.array([r.mu for r in resolvents], dtype=float)


def _check_horizon(t, resolvents):
    for r in resolvents or ():
        if t > r.T * (1 + 1e-12):
            raise EvolutionError(f"t={t} beyond the resolvent horizon {r.T} of mode {r.mode}")


def evolve_trajectory(t: float, state0: HistoryState, kernel: MemoryKernel, mu,
                      dt: float = DEFAULT_DT, kernel_part: str = "k1"):
    """v_j on a uniform grid of [0, t]; returns (grid, v with shape (N, n + 1)).

    Mode j solves v + mu_j k * v = v_bar_j + int_0^t h_j, which is the
    variation-of-parameters formula v = s v_bar + s * h written as one
    Volterra equation.
    """
    mu = np.asarray(mu, dtype=float)
    grid = _flow_grid(t, dt)
    h = history_forcing(state0, kernel, grid, mu, kernel_part)
    weights = volterra_weights(kernel, grid)
    v = np.empty((state0.N, grid.n + 1))
    for j in range(state0.N):
        v[j] = solve_volterra(mu[j], weights, state0.v[j], rhs_prime=h[j])
    return grid, v


def semigroup_apply(t: float, state0: HistoryState, resolvents: Optional[Sequence[ScalarResolvent]],
                    kernel: MemoryKernel, mu=None, dt: float = DEFAULT_DT,
                    kernel_part: str = "k1") -> HistoryState:
    """e^{tA} applied to ``state0``.

    The new lag grid is the flow grid's lags (0, t] followed by the old lags
    shifted by t, so states produced from the same start share nodes and
    no re-interpolation is needed.  ``resolvents`` supply mu_j and the
    horizon; pass ``mu`` directly when they are not at hand.
    """
    if t < 0:
        raise EvolutionError("t must be nonnegative")
    if t == 0:
        return state0
    mu = _mode_mu(resolvents, mu)
    if mu.size != state0.N:
        raise EvolutionError("one mu per mode required")
    _check_horizon(t, resolvents)
    grid, v = evolve_trajectory(t, state0, kernel, mu, dt, kernel_part)
    lags = t - grid.nodes[:-1][::-1]                     # dt, 2dt, ..., t
    recent = v[:, :-1][:, ::-1]                          # v(t - lag)
    lag_grid = np.concatenate([lags, state0.history_grid + t])
    eta = np.concatenate([recent, state0.eta], axis=1)
    breaks = (t,) + tuple(b + t for b in state0.breaks)
    return HistoryState(v[:, -1], eta, lag_grid, breaks)


def variation_of_parameters(t: float, state0: HistoryState, resolvents: Sequence[ScalarResolvent],
                            kernel: MemoryKernel, dt: float = DEFAULT_DT,
                            kernel_part: str = "k1") -> np.ndarray:
    """v_j(t) = s_j(t) v_bar_j + int_0^t s_j(t - tau) h_j(tau) d tau by quadrature.

    Independent of :func:`semigroup_apply`; used to cross-check it.
    """
    mu = _mode_mu(resolvents, None)
    _check_horizon(t, resolvents)
    grid = _flow_grid(t, dt)
    h = history_forcing(state0, kernel, grid, mu, kernel_part)
    pts, wts = gauss_samples(grid.nodes)
    h_q = CubicInterpolant(grid.nodes, h)(pts)
    out = np.empty(state0.N)
    for j, r in enumerate(resolvents):
        out[j] = r(np.array([t]))[0] * state0.v[j] + (wts * r(t - pts)) @ h_q[j]
    return out


# ---------------------------------------------------------------------------
# Dissipativity
# ---------------------------------------------------------------------------

def lambda_zero(kernel: MemoryKernel, epsilon: float) -> float:
    """max{0, -k0 + (1 - eps/2)/(1 - eps) rho(0)}."""
    if not 0.0 < epsilon < 1.0:
        raise EvolutionError("epsilon must lie in (0, 1)")
    r0 = float(kernel_rho(kernel, 0.0))
    return max(0.0, -kernel.k0 + (1.0 - epsilon / 2.0) / (1.0 - epsilon) * r0)


def quasi_dissipativity_form(state: HistoryState, kernel: MemoryKernel, mu,
                             epsilon: float = 0.5, domain_tol: float = 1e-6) -> dict:
    """<A phi, phi> in the energy inner product against lambda_0 ||phi||**2.

    The form is the sum of
      -k0 sum mu v**2,
      -sum mu_j v_j int k1 eta_j,
      -sum mu_j int rho eta_j eta_j',
    each evaluated by quadrature.
    """
    mu = np.asarray(mu, dtype=float)
    if not np.all(np.isfinite(state.eta)) or not np.all(np.isfinite(state.v)):
        raise EvolutionError("history must be finite")
    gap = state.domain_gap()
    if gap > domain_tol * max(1.0, float(np.max(np.abs(state.v)))):
        raise EvolutionError(f"domain condition eta(0) = v violated (gap {gap:.3e})")
    rule = _rule_for(state, kernel)
    _check_differentiable(state, rule)
    eq = rule.value(state.eta)
    dq = rule.slope(state.eta)
    body = slice(rule.n_head, None)
    k1_body = np.zeros(rule.points.size - rule.n_head)
    if not kernel.is_zero:
        k1_body = kernel.density(rule.points[body])
    int_k1_eta = (eq[:, body] * rule.weights[body]) @ k1_body + rule.head_value(state.eta) @ rule.head_weights
    rho_q = _rho_at(kernel, rule.points)
    t1 = -kernel.k0 * float(mu @ state.v**2)
    t2 = -float(mu @ (state.v * int_k1_eta))
    t3 = -float(mu @ ((eq * dq * rule.weights) @ rho_q))
    form = t1 + t2 + t3
    norm_sq = energy_norm(state, kernel, mu) ** 2
    lam0 = lambda_zero(kernel, epsilon)
    bound = lam0 * norm_sq
    return {
        "form_value": form,
        "bound": bound,
        "lambda0": lam0,
        "norm_sq": norm_sq,
        "terms": (t1, t2, t3),
        "satisfied": bool(form <= bound + 1e-8 * norm_sq),
    }


def _check_differentiable(state: HistoryState, rule: HistoryRule):
    # a jump across a break would show up as mismatched one-sided values
    s = state.history_grid
    for b in state.breaks:
        k = int(np.searchsorted(s, b))
        if 3 <= k < s.size - 3:
            lv = _extrapolate(s[k - 4:k], state.eta[:, k - 4:k], s[k])
            rv = state.eta[:, k]
            if np.max(np.abs(lv - rv)) > 1e-3 * max(1.0, float(np.max(np.abs(state.eta)))):
                raise EvolutionError(f"history not differentiable near lag {b}")
    if not np.all(np.isfinite(rule.slope(state.eta))):
        raise EvolutionError("history slope is not finite")


def _extrapolate(xs, ys, x):
    return CubicInterpolant(xs, ys)(np.array([x]))[..., 0]


# ---------------------------------------------------------------------------
# Test states
# ---------------------------------------------------------------------------

def smooth_test_state(N: int, history_grid, amplitude: float = 1.0) -> HistoryState:
    """v_j = a/j, eta_j(s) = v_j e^{-s} (1 + s/2): smooth with eta(0) = v."""
    s = np.asarray(history_grid, dtype=float)
    v = amplitude / np.arange(1, N + 1)
    eta = v[:, None] * np.exp(-s)[None, :] * (1.0 + 0.5 * s)[None, :]
    return HistoryState(v, eta, s)


def random_admissible_state(rng: np.random.Generator, N: int, history_grid) -> HistoryState:
    """Random smooth state in the domain: eta_j(s) = v_j e^{-a s} + c s e^{-b s}."""
    s = np.asarray(history_grid, dtype=float)
    v = rng.normal(size=N)
    a = rng.uniform(0.2, 5.0, size=N)
    b = rng.uniform(0.2, 5.0, size=N)
    c = rng.normal(size=N)
    eta = v[:, None] * np.exp(-a[:, None] * s) + c[:, None] * s * np.exp(-b[:, None] * s)
    return HistoryState(v, eta, s)

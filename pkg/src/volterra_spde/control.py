"""Feedback control of the truncated system by least-squares Monte Carlo.

The controlled state keeps n <= 4 modes.  Mode j evolves as

    dX_j = (-mu_j k0 X_j + M_j + sqrt(lam_j) R_j(t, X, gamma)) dt + sqrt(lam_j) dW_j,

where M_j carries the memory.  Only kernels with a finite Markovian
embedding are accepted: k1 = 0 (no M) and k1 = a e^{-b t}, for which
dM_j = (-b M_j - a mu_j X_j) dt with a zero initial history.  Regression
features use the full state (X, M).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Callable, Optional, Sequence

import numpy as np

from ._rng import brownian_increments
from .kernels import MemoryKernel, heat_kernel
from .spectral import physical_grid, to_physical

__all__ = [
    "ControlError",
    "ControlProblem",
    "AffineStructure",
    "FeedbackPolicy",
    "SimSpec",
    "hamiltonian",
    "cost_functional",
    "girsanov_weight",
    "fbsde_solve",
    "FBSDEResult",
    "lq_riccati_oracle",
    "verify_value_lower_bound",
    "policy_gain",
    "lq_problem",
    "heat_tracking_problem",
    "problem_from_config",
    "open_loop_piecewise",
]

GRID_POINTS = 64
GOLDEN_ITERS = 60


class ControlError(ValueError):
    pass


@dataclass(frozen=True)
class AffineStructure:
    """L = l0 + l1 gamma + l2 gamma**2 and R = r0 + r1 gamma.

    l0, l1: (t, X) -> (P,); l2: scalar >= 0; r0, r1: (t, X) -> (P, n).
    """

    l0: Callable
    l1: Callable
    l2: float
    r0: Callable
    r1: Callable


@dataclass(frozen=True, eq=False)
class ControlProblem:
    mu: np.ndarray
    lam: np.ndarray
    kernel: MemoryKernel
    r: Callable                 # (t, X, gamma) -> (P, n)
    ell: Callable               # (t, X, gamma) -> (P,)
    phi: Callable               # X -> (P,)
    U: tuple
    T: float
    x0: np.ndarray
    phi_prime: Optional[Callable] = None
    r_bound: float = float("inf")
    growth: tuple = (1.0, 1.0)  # (L, k) in |phi'| <= L (1 + |x|)**k
    affine: Optional[AffineStructure] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if not (mu.shape == lam.shape == x0.shape) or mu.size > 4:
            raise ControlError("mu, lam and x0 must share a length n <= 4")
        if np.any(mu < 0) or np.any(lam < 0):
            raise ControlError("mu and lam must be nonnegative")
        lo, hi = self.U
        if not lo <= hi:
            raise ControlError("control set must be a nonempty interval")
        _memory_rate(self.kernel)  # rejects kernels without an embedding
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "x0", x0)

    @property
    def n(self) -> int:
        return self.mu.size

    @property
    def has_memory(self) -> bool:
        return not self.kernel.is_zero

    @property
    def state_dim(self) -> int:
        return 2 * self.n if self.has_memory else self.n

    def validate(self, rng: Optional[np.random.Generator] = None, n: int = 500) -> dict:
        """Spot-check |R| <= r_bound and the polynomial growth of phi'."""
        rng = rng or np.random.default_rng(0)
        X = 3.0 * rng.standard_normal((n, self.n))
        g = rng.uniform(*self.U, size=n)
        t = rng.uniform(0.0, self.T)
        R = np.abs(np.asarray(self.r(t, X, g))).max(initial=0.0)
        r_ok = bool(R <= self.r_bound * (1 + 1e-12))
        phi_ok = True
        worst = 0.0
        if self.phi_prime is not None:
            L, k = self.growth
            dp = np.abs(np.asarray(self.phi_prime(X)))
            bound = L * (1.0 + np.abs(X)) ** k
            worst = float(np.max(dp / bound))
            phi_ok = worst <= 1 + 1e-12
        return {"r_bounded": r_ok, "max_abs_r": float(R), "phi_growth_ok": phi_ok,
                "phi_growth_ratio": worst}


def _memory_rate(kernel: MemoryKernel):
    if kernel.is_zero:
        return None
    if kernel.name == "exponential":
        return float(kernel.params["amplitude"]), float(kernel.params["rate"])
    raise ControlError("control needs k1 = 0 or an exponential k1 (finite Markovian embedding)")


@dataclass(frozen=True)
class SimSpec:
    """Monte Carlo settings for the control layer."""

    seed: int
    n_paths: int
    n_steps: int

    def dt(self, T: float) -> float:
        return T / self.n_steps


# ---------------------------------------------------------------------------
# Hamiltonian
# ---------------------------------------------------------------------------

def _objective(problem, t, X, Z, gamma):
    R = np.asarray(problem.r(t, X, gamma))
    return np.asarray(problem.ell(t, X, gamma)) + np.sum(Z * R, axis=-1)


def hamiltonian(problem: ControlProblem, t: float, X, Z) -> dict:
    """psi(t, X, Z) = min over U of L + <Z, R>, vectorised over rows of X and Z."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    P = max(X.shape[0], Z.shape[0])
    X = np.broadcast_to(X, (P, X.shape[1]))
    Z = np.broadcast_to(Z, (P, problem.n))
    lo, hi = problem.U
    if problem.affine is not None:
        a = problem.affine
        lin = np.asarray(a.l1(t, X)) + np.sum(Z * np.asarray(a.r1(t, X)), axis=-1)
        lin = np.broadcast_to(lin, (P,))
        if a.l2 > 0:
            g = np.clip(-lin / (2.0 * a.l2), lo, hi)
        else:
            g = np.where(lin < 0, hi, lo)      # zero slope: smaller endpoint
    else:
        g = _numeric_argmin(problem, t, X, Z)
    psi = _objective(problem, t, X, Z, g)
    return {"psi_value": np.broadcast_to(psi, (P,)).copy(), "gamma_star": np.asarray(g, dtype=float)}


def _numeric_argmin(problem, t, X, Z):
    lo, hi = problem.U
    P = X.shape[0]
    grid = np.linspace(lo, hi, GRID_POINTS)
    vals = np.stack([np.broadcast_to(_objective(problem, t, X, Z, np.full(P, g)), (P,)) for g in grid], axis=1)
    k = np.argmin(vals, axis=1)                       # first minimiser: smaller gamma on ties
    best_g, best_v = grid[k], vals[np.arange(P), k]
    a = grid[np.maximum(k - 1, 0)]
    b = grid[np.minimum(k + 1, GRID_POINTS - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = _objective(problem, t, X, Z, c)
    fd = _objective(problem, t, X, Z, d)
    for _ in range(GOLDEN_ITERS):
        left = fc <= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - invphi * (b - a)
        new_d = a + invphi * (b - a)
        c, d = new_c, new_d
        fc = _objective(problem, t, X, Z, c)
        fd = _objective(problem, t, X, Z, d)
    g = 0.5 * (a + b)
    fg = _objective(problem, t, X, Z, g)
    better = fg < best_v
    return np.where(better, g, best_g)


# ---------------------------------------------------------------------------
# Forward simulation
# ---------------------------------------------------------------------------

def _initial_state(problem, P):
    S = np.zeros((P, problem.state_dim))
    S[:, :problem.n] = problem.x0
    return S


def _drift(problem, S, R):
    n = problem.n
    X = S[:, :n]
    k0 = problem.kernel.k0
    out = np.empty_like(S)
    sq = np.sqrt(problem.lam)
    out[:, :n] = -problem.mu * k0 * X + sq * R
    if problem.has_memory:
        a, b = _memory_rate(problem.kernel)
        M = S[:, n:]
        out[:, :n] += M
        out[:, n:] = -b * M - a * problem.mu * X
    return out


def _noise(problem, spec: SimSpec, seed_offset: int = 0):
    dt = spec.dt(problem.T)
    dW = brownian_increments(spec.seed + seed_offset, np.arange(spec.n_paths), problem.n, spec.n_steps, dt)
    return np.transpose(dW, (0, 2, 1))               # (P, steps, n)


def _step(problem, S, R, dW, dt):
    """Euler-Maruyama step of the embedded state."""
    S_new = S + _drift(problem, S, R) * dt
    S_new[:, :problem.n] += np.sqrt(problem.lam) * dW
    return S_new


def simulate_reference(problem: ControlProblem, spec: SimSpec, seed_offset: int = 0):
    """Uncontrolled forward paths (R = 0): states (P, steps+1, d) and increments."""
    dt = spec.dt(problem.T)
    dW = _noise(problem, spec, seed_offset)
    P = spec.n_paths
    S = np.empty((P, spec.n_steps + 1, problem.state_dim))
    S[:, 0] = _initial_state(problem, P)
    zero = np.zeros((P, problem.n))
    for i in range(spec.n_steps):
        S[:, i + 1] = _step(problem, S[:, i], zero, dW[:, i], dt)
    return S, dW


# ---------------------------------------------------------------------------
# Cost and reweighting
# ---------------------------------------------------------------------------

def open_loop_piecewise(values, T: float) -> Callable:
    """gamma(t) = values[k] on the k-th of len(values) equal pieces of [0, T]."""
    values = np.asarray(values, dtype=float)

    def control(t, X=None):
        k = min(int(t / T * values.size), values.size - 1)
        return values[k]

    control.values = values
    return control


def _gamma(control, problem, t, S, step):
    if isinstance(control, FeedbackPolicy):
        return control.gamma_map(t, S, step=step)
    g = control(t, S) if callable(control) else float(control)
    return np.full(S.shape[0], float(g)) if np.ndim(g) == 0 else np.asarray(g, dtype=float)


def _summary(samples, path_ids=None):
    if not np.all(np.isfinite(samples)):
        bad = int(np.nonzero(~np.isfinite(samples))[0][0])
        raise ControlError(f"non-finite cost sample on path {bad}")
    n = samples.size
    return {"J_estimate": float(samples.mean()),
            "std_error": float(samples.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
            "n_paths": n}


def cost_functional(problem: ControlProblem, control, spec: SimSpec, method: str = "direct",
                    seed_offset: int = 0) -> dict:
    """Monte Carlo estimate of E[int_0^T L dt + Phi(X_T)].

    ``direct`` simulates the controlled dynamics; ``girsanov`` evaluates the
    control on reference paths and reweights them.
    """
    dt = spec.dt(problem.T)
    P = spec.n_paths
    if method == "girsanov":
        S, dW = simulate_reference(problem, spec, seed_offset)
        run = np.zeros(P)
        Rs = np.empty((P, spec.n_steps, problem.n))
        for i in range(spec.n_steps):
            t = i * dt
            g = _gamma(control, problem, t, S[:, i], i)
            Rs[:, i] = problem.r(t, S[:, i, :problem.n], g)
            run += np.asarray(problem.ell(t, S[:, i, :problem.n], g)) * dt
        w = girsanov_weight(Rs, dW, dt)
        out = _summary(w * (run + problem.phi(S[:, -1, :problem.n])))
        out["mean_weight"] = float(w.mean())
        return out
    if method != "direct":
        raise ControlError("method must be 'direct' or 'girsanov'")
    dW = _noise(problem, spec, seed_offset)
    S = _initial_state(problem, P)
    run = np.zeros(P)
    for i in range(spec.n_steps):
        t = i * dt
        g = _gamma(control, problem, t, S, i)
        X = S[:, :problem.n]
        run += np.asarray(problem.ell(t, X, g)) * dt
        S = _step(problem, S, problem.r(t, X, g), dW[:, i], dt)
    return _summary(run + problem.phi(S[:, :problem.n]))


def girsanov_weight(R, dW, dt: float) -> np.ndarray:
    """exp(sum R.dW - 1/2 sum |R|**2 dt) per path; R and dW are (P, steps, n)."""
    R = np.asarray(R, dtype=float)
    dW = np.asarray(dW, dtype=float)
    R = np.broadcast_to(R, dW.shape)
    return np.exp(np.sum(R * dW, axis=(1, 2)) - 0.5 * dt * np.sum(R * R, axis=(1, 2)))


# ---------------------------------------------------------------------------
# Regression
# ---------------------------------------------------------------------------

def _feature_powers(dim, degree):
    combos = [()]
    for d in range(1, degree + 1):
        combos.extend(combinations_with_replacement(range(dim), d))
    return combos


@dataclass(frozen=True, eq=False)
class _Features:
    mean: np.ndarray
    scale: np.ndarray
    combos: tuple

    def __call__(self, S):
        U = (S - self.mean) / self.scale
        cols = [np.ones(S.shape[0])]
        for c in self.combos[1:]:
            col = np.ones(S.shape[0])
            for k in c:
                col = col * U[:, k]
            cols.append(col)
        return np.stack(cols, axis=1)


def _fit_features(S, degree):
    mean = S.mean(axis=0)
    scale = S.std(axis=0)
    scale = np.where(scale > 1e-12, scale, 1.0)
    return _Features(mean, scale, tuple(_feature_powers(S.shape[1], degree)))


@dataclass(frozen=True, eq=False)
class FeedbackPolicy:
    """Z(t_i, X) = features_i(X) @ z_regression[i]; gamma = argmin of the Hamiltonian."""

    problem: ControlProblem
    features: list
    z_regression: list          # per step: (n_features, n) or constant (n,) at step 0
    dt: float

    def z(self, t: float, S, step: Optional[int] = None):
        i = step if step is not None else min(int(t / self.dt + 1e-9), len(self.z_regression) - 1)
        beta = self.z_regression[i]
        S = np.atleast_2d(S)
        if beta.ndim == 1:
            return np.broadcast_to(beta, (S.shape[0], beta.size))
        return self.features[i](S) @ beta

    def gamma_map(self, t: float, S, step: Optional[int] = None):
        S = np.atleast_2d(S)
        Z = self.z(t, S, step)
        return hamiltonian(self.problem, t, S[:, :self.problem.n], Z)["gamma_star"]


def policy_gain(policy: FeedbackPolicy, step: int, center: float, half_width: float, n: int = 21) -> float:
    """Least-squares slope of gamma against a scalar state over [center -/+ half_width]."""
    if policy.problem.state_dim != 1:
        raise ControlError("policy_gain needs a one-dimensional state")
    xs = np.linspace(center - half_width, center + half_width, n)[:, None]
    g = policy.gamma_map(step * policy.dt, xs, step=step)
    return float(np.polyfit(xs[:, 0], g, 1)[0])


@dataclass(frozen=True, eq=False)
class FBSDEResult:
    Y0: float
    Y0_std_error: float
    policy: FeedbackPolicy
    iterations: int
    Y0_history: list
    diagnostics: list           # per step: rank, n_features, condition flag
    converged: bool


def fbsde_solve(problem: ControlProblem, spec: SimSpec, degree: int = 2, tol: float = 1e-4,
                max_iter: int = 30) -> FBSDEResult:
    """Backward LSMC with Picard iteration over Z, started from Z = 0.

    Iteration k regresses the multi-step response
    Y_i ~ E[Phi(X_T) + sum_{l >= i} psi(t_l, X_l, Z^{k-1}_l) dt | X_i]
    and sets Z_i = E[Y_{i+1} dW_i | X_i] / dt, with Y_{i+1} the same response.
    """
    if degree > 3:
        raise ControlError("feature degree must be at most 3")
    dt = spec.dt(problem.T)
    S, dW = simulate_reference(problem, spec)
    P, K = spec.n_paths, spec.n_steps
    n = problem.n
    feats = [_fit_features(S[:, i], degree) for i in range(K + 1)]
    basis = [f(S[:, i]) for i, f in enumerate(feats)]
    terminal = np.asarray(problem.phi(S[:, -1, :n]), dtype=float)
    Z = np.zeros((P, K, n))
    history = []
    diagnostics = [None] * K
    betas = [None] * K
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        psi = np.empty((P, K))
        for i in range(K):
            psi[:, i] = hamiltonian(problem, i * dt, S[:, i, :n], Z[:, i])["psi_value"]
        # response[i] = Phi + sum_{l >= i} psi_l dt
        tail = np.cumsum(psi[:, ::-1], axis=1)[:, ::-1] * dt
        response = np.concatenate([tail + terminal[:, None], terminal[:, None]], axis=1)
        newZ = np.empty_like(Z)
        for i in range(K):
            target = response[:, i + 1, None] * dW[:, i] / dt          # (P, n)
            if i == 0:
                betas[0] = target.mean(axis=0)
                newZ[:, 0] = betas[0]
                diagnostics[0] = {"step": 0, "rank": 1, "n_features": 1, "rank_deficient": False}
                continue
            A = basis[i]
            coef, _, rank, _ = np.linalg.lstsq(A, target, rcond=None)
            betas[i] = coef
            newZ[:, i] = A @ coef
            diagnostics[i] = {"step": i, "rank": int(rank), "n_features": A.shape[1],
                              "rank_deficient": bool(rank < A.shape[1])}
        Z = newZ
        y0_samples = response[:, 0]
        history.append(float(y0_samples.mean()))
        if it > 1 and abs(history[-1] - history[-2]) < tol:
            converged = True
            break
    se = float(y0_samples.std(ddof=1) / math.sqrt(P))
    policy = FeedbackPolicy(problem, feats[:K], betas, dt)
    return FBSDEResult(history[-1], se, policy, it, history, diagnostics, converged)


# ---------------------------------------------------------------------------
# Oracle and verification
# ---------------------------------------------------------------------------

def lq_riccati_oracle(a: float, b: float, q: float, p_T: float, T: float, x0: float = 1.0,
                      dt: float = 1e-4) -> dict:
    """Backward RK4 for P' = -2aP - q + b**2 P**2, P(T) = p_T."""
    n = int(round(T / dt))
    h = T / n

    def rhs(P):
        return -2.0 * a * P - q + b * b * P * P

    P = np.empty(n + 1)
    P[n] = p_T
    for i in range(n, 0, -1):
        y = P[i]
        k1 = rhs(y)
        k2 = rhs(y - 0.5 * h * k1)
        k3 = rhs(y - 0.5 * h * k2)
        k4 = rhs(y - h * k3)
        P[i - 1] = y - h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        if not np.isfinite(P[i - 1]) or abs(P[i - 1]) > 1e12:
            raise ControlError(f"Riccati solution blows up near t={(i - 1) * h:.6g}")
    t = np.linspace(0.0, T, n + 1)
    integral = float(h * (P.sum() - 0.5 * (P[0] + P[-1])))
    # Simpson when possible for the constant term
    if n % 2 == 0:
        integral = float(h / 3.0 * (P[0] + P[-1] + 4 * P[1:-1:2].sum() + 2 * P[2:-1:2].sum()))
    return {"t": t, "P": P, "optimal_cost": float(P[0] * x0 * x0 + b * b * integral),
            "optimal_gain": -b * P, "P0": float(P[0])}


def verify_value_lower_bound(problem: ControlProblem, Y0: float, m: int, spec: SimSpec,
                             pieces: int = 5, seed: int = 12345) -> dict:
    """Check J(random open-loop control) >= Y0 - 3 std errors for m controls."""
    rng = np.random.default_rng(seed)
    rows = []
    for k in range(m):
        values = rng.uniform(*problem.U, size=pieces)
        est = cost_functional(problem, open_loop_piecewise(values, problem.T), spec, seed_offset=1000 + k)
        violated = est["J_estimate"] < Y0 - 3.0 * est["std_error"]
        rows.append({"control": k, "values": values.tolist(), **est, "violation": bool(violated)})
    return {"Y0": Y0, "m": m, "violations": int(sum(r["violation"] for r in rows)), "rows": rows}


# ---------------------------------------------------------------------------
# Built-in problems
# ---------------------------------------------------------------------------

def lq_problem(a: float = 0.0, b: float = 1.0, q: float = 1.0, p_T: float = 0.0, T: float = 1.0,
               x0: float = 1.0, U=(-10.0, 10.0)) -> ControlProblem:
    """Scalar dX = (aX + b gamma) dt + b dW with cost int qX**2 + gamma**2 + p_T X(T)**2."""
    k0 = 1.0
    mu = np.array([-a / k0])
    if mu[0] < 0:
        raise ControlError("the benchmark embeds a = -mu k0 and needs a <= 0")
    affine = AffineStructure(
        l0=lambda t, X: q * X[:, 0] ** 2,
        l1=lambda t, X: np.zeros(X.shape[0]),
        l2=1.0,
        r0=lambda t, X: np.zeros_like(X),
        r1=lambda t, X: np.ones_like(X),
    )
    lo, hi = U
    return ControlProblem(
        mu=mu, lam=np.array([b * b]), kernel=heat_kernel(k0),
        r=lambda t, X, g: np.broadcast_to(np.asarray(g, dtype=float)[..., None], X.shape),
        ell=lambda t, X, g: q * X[:, 0] ** 2 + np.asarray(g, dtype=float) ** 2,
        phi=lambda X: p_T * X[:, 0] ** 2,
        phi_prime=lambda X: 2.0 * p_T * X,
        growth=(max(2.0 * abs(p_T), 1e-300), 1.0),
        U=(lo, hi), T=T, x0=np.array([x0]), r_bound=max(abs(lo), abs(hi)), affine=affine,
        name="lq", params={"a": a, "b": b, "q": q, "p_T": p_T, "T": T, "x0": x0, "U": [lo, hi]},
    )


def heat_tracking_problem(kernel: MemoryKernel, n: int = 2, q: float = 1.0, p_T: float = 0.0,
                          noise_scale: float = 1.0, T: float = 1.0, x0=None, U=(-2.0, 2.0),
                          n_phys: int = 64) -> ControlProblem:
    """Dirichlet modes on (0, pi) with a spatially homogeneous control.

    Running cost integrates l(v, gamma) = q v**2 + gamma**2 over the physical
    grid; the terminal cost integrates p_T v(T)**2.
    """
    j = np.arange(1, n + 1)
    mu = j.astype(float) ** 2
    lam = noise_scale / mu
    proj_one = np.sqrt(2.0 / np.pi) * (1.0 - (-1.0) ** j) / j       # <1, e_j>
    x0 = np.asarray(x0 if x0 is not None else proj_one, dtype=float)
    h = np.pi / (n_phys + 1)
    length = np.pi

    def field_sq(X):
        return h * np.sum(to_physical(X, n_phys) ** 2, axis=-1)

    affine = AffineStructure(
        l0=lambda t, X: q * field_sq(X),
        l1=lambda t, X: np.zeros(X.shape[0]),
        l2=length,
        r0=lambda t, X: np.zeros_like(X),
        r1=lambda t, X: np.broadcast_to(proj_one / np.sqrt(lam), X.shape),
    )
    lo, hi = U
    # R_j = gamma <1, e_j> / sqrt(lam_j) so that sqrt(Q) R is the homogeneous forcing gamma
    return ControlProblem(
        mu=mu, lam=lam, kernel=kernel,
        r=lambda t, X, g: np.asarray(g, dtype=float)[..., None] * (proj_one / np.sqrt(lam)),
        ell=lambda t, X, g: q * field_sq(X) + length * np.asarray(g, dtype=float) ** 2,
        phi=lambda X: p_T * field_sq(X),
        phi_prime=lambda X: 2.0 * p_T * X,
        growth=(max(2.0 * abs(p_T), 1e-300), 1.0),
        U=(lo, hi), T=T, x0=x0, r_bound=max(abs(lo), abs(hi)) * float(np.max(proj_one / np.sqrt(lam))),
        affine=affine, name="heat_tracking",
        params={"n": n, "q": q, "p_T": p_T, "noise_scale": noise_scale, "T": T, "U": [lo, hi]},
    )


def problem_from_config(spec, kernel: Optional[MemoryKernel] = None) -> ControlProblem:
    spec = dict(spec)
    name = spec.pop("name", "lq")
    if name == "lq":
        U = tuple(spec.pop("U", (-10.0, 10.0)))
        return lq_problem(U=U, **spec)
    if name == "heat_tracking":
        U = tuple(spec.pop("U", (-2.0, 2.0)))
        return heat_tracking_problem(kernel or heat_kernel(1.0), U=U, **spec)
    raise ControlError(f"unknown control problem {name!r}")

"""Creep-type memory kernels k(t) = k0 + int_0^t k1(s) ds.

A kernel carries its relaxation density ``k1`` as a vectorised callable plus
whatever closed forms are known for it (antiderivative, tail integral
``rho``, Laplace transform).  Anything not registered falls back to
quadrature that resolves the admitted ``t**-gamma`` singularity at the
origin.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import PchipInterpolator
from scipy.special import gamma as gamma_fn
from scipy.special import gammainc, gammaincc

from ._quad import gauss_jacobi_unit, gauss_legendre_unit

__all__ = [
    "KernelError",
    "MemoryKernel",
    "SectorialityReport",
    "KernelValidationReport",
    "heat_kernel",
    "exponential_kernel",
    "singular_kernel",
    "callable_kernel",
    "table_kernel",
    "kernel_from_config",
    "eval_k1",
    "rho",
    "laplace_k",
    "sectoriality",
    "validate_kernel",
]

RHO_RTOL = 1e-10
FD_REL_STEP = 1e-5
CONVEXITY_SLACK = 1e-10
SCAN_EPS = 1e-8
DEFAULT_SCAN = (1e-4, 1e6, 2000)

Array = np.ndarray


class KernelError(ValueError):
    """Raised for invalid kernels or out-of-domain arguments."""


# Composite rule on [0, 1] used for the numeric antiderivative of k1: a
# Gauss-Jacobi panel at the origin followed by geometrically growing panels.
_PANEL_EDGES = np.concatenate([[0.0], 2.0 ** np.arange(-12, 1)])


def _unit_rule(gamma_exp, order=16):
    nodes, weights = [], []
    for a, b in zip(_PANEL_EDGES[:-1], _PANEL_EDGES[1:]):
        h = b - a
        if a == 0.0:
            x, w = gauss_jacobi_unit(order, -gamma_exp)
            # int_0^h x^-g f = h^(1-g) sum w f(h x); fold x^-g back into w
            # so that the rule integrates f directly.
            nodes.append(h * x)
            weights.append(h ** (1.0 - gamma_exp) * w * (h * x) ** gamma_exp)
        else:
            x, w = gauss_legendre_unit(order)
            nodes.append(a + h * x)
            weights.append(h * w)
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass(frozen=True, eq=False)
class MemoryKernel:
    """Creep kernel k(t) = k0 + int_0^t k1.

    ``k1`` is None for the pure heat kernel (k1 = 0).  ``singularity_exponent``
    is the declared order gamma of the blow-up of k1 at t = 0.
    """

    k0: float
    k1: Optional[Callable[[Array], Array]] = None
    k1_prime: Optional[Callable[[Array], Array]] = None
    singularity_exponent: float = 0.0
    name: str = "custom"
    params: Mapping = field(default_factory=dict)
    k1_integral: Optional[Callable[[Array], Array]] = None
    rho_closed: Optional[Callable[[Array], Array]] = None
    laplace_k1_closed: Optional[Callable[[Array], Array]] = None
    k1_regular: Optional[Callable[[Array], Array]] = None
    support: float = math.inf           # k1 vanishes beyond this time

    def __post_init__(self):
        if not (self.k0 > 0 and math.isfinite(self.k0)):
            raise KernelError(f"k0 must be positive and finite, got {self.k0}")
        if not 0.0 <= self.singularity_exponent < 1.0:
            raise KernelError(
                f"singularity exponent must lie in [0, 1), got {self.singularity_exponent}"
            )

    # -- basic evaluation -------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return self.k1 is None

    @property
    def fd_derivative(self) -> bool:
        """True when k1' is produced by finite differences."""
        return self.k1 is not None and self.k1_prime is None

    def describe(self) -> dict:
        return {
            "type": self.name,
            "k0": self.k0,
            "gamma": self.singularity_exponent,
            "parameters": dict(self.params),
        }

    def density(self, t) -> Array:
        t = np.asarray(t, dtype=float)
        if self.k1 is None:
            return np.zeros_like(t)
        return np.asarray(self.k1(t), dtype=float)

    def density_prime(self, t) -> Array:
        t = np.asarray(t, dtype=float)
        if self.k1 is None:
            return np.zeros_like(t)
        if self.k1_prime is not None:
            return np.asarray(self.k1_prime(t), dtype=float)
        h = t * FD_REL_STEP
        return (self.density(t + h) - self.density(t - h)) / (2.0 * h)

    def regular_part(self, t) -> Array:
        """g(t) = t**gamma * k1(t), bounded near the origin."""
        t = np.asarray(t, dtype=float)
        if self.k1 is None:
            return np.zeros_like(t)
        if self.k1_regular is not None:
            return np.asarray(self.k1_regular(t), dtype=float)
        g = self.singularity_exponent
        if g == 0:
            return self.density(t)
        # the limit at 0 is read off just above it
        t = np.where(t > 0, t, np.finfo(float).tiny)
        return t**g * self.density(t)

    def antiderivative(self, t) -> Array:
        """K1(t) = int_0^t k1(s) ds."""
        t = np.asarray(t, dtype=float)
        if self.k1 is None:
            return np.zeros_like(t)
        if self.k1_integral is not None:
            return np.asarray(self.k1_integral(t), dtype=float)
        u, w = _unit_rule(self.singularity_exponent)
        flat = np.atleast_1d(t).ravel()
        out = np.empty_like(flat)
        for start in range(0, flat.size, 4096):
            tt = flat[start:start + 4096, None]
            x = tt * u[None, :]
            with np.errstate(invalid="ignore", divide="ignore"):
                vals = self.density(np.where(x > 0, x, 1.0))
            vals = np.where(x > 0, vals, 0.0)
            out[start:start + 4096] = tt[:, 0] * (vals @ w)
        return out.reshape(np.shape(t))

    def k(self, t) -> Array:
        """The creep function k0 + K1(t)."""
        return self.k0 + self.antiderivative(t)

    def scaled(self, c: float) -> "MemoryKernel":
        """Kernel c * k (both k0 and k1 multiplied by c > 0)."""
        if not c > 0:
            raise KernelError("scale factor must be positive")

        def mul(f):
            return None if f is None else (lambda t, f=f: c * f(t))

        return MemoryKernel(
            k0=c * self.k0,
            k1=mul(self.k1),
            k1_prime=mul(self.k1_prime),
            singularity_exponent=self.singularity_exponent,
            name=self.name,
            params={**self.params, "scale": c * self.params.get("scale", 1.0)},
            k1_integral=mul(self.k1_integral),
            rho_closed=mul(self.rho_closed),
            laplace_k1_closed=mul(self.laplace_k1_closed),
            k1_regular=mul(self.k1_regular),
            support=self.support,
        )

    # -- tail integral and transforms --------------------------------------
    def rho(self, t) -> Array:
        return rho(self, t)

    def laplace_k1(self, lam) -> Array:
        lam = np.asarray(lam, dtype=complex)
        if self.k1 is None:
            return np.zeros_like(lam)
        if self.laplace_k1_closed is not None:
            return np.asarray(self.laplace_k1_closed(lam), dtype=complex)
        return np.vectorize(self._numeric_laplace_k1, otypes=[complex])(lam)

    def _numeric_laplace_k1(self, lam: complex) -> complex:
        g = self.singularity_exponent
        p = 1.0 / (1.0 - g)

        # t = x**p removes the t**-g singularity on [0, 1].
        def head(x, part):
            t = x**p
            val = p * x ** (p - 1.0) * t ** (-g) * self.regular_part(t) * np.exp(-lam * t)
            return val.real if part == 0 else val.imag

        def tail(t, part):
            val = self.density(t) * np.exp(-lam * t)
            return val.real if part == 0 else val.imag

        split = min(1.0, self.support)
        out = 0j
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                for part, unit in ((0, 1.0), (1, 1j)):
                    a, _ = integrate.quad(head, 0.0, split ** (1.0 - g), args=(part,), limit=500)
                    b = 0.0
                    if self.support > split:
                        b, _ = integrate.quad(tail, split, self.support, args=(part,), limit=500)
                    out += unit * (a + b)
            except integrate.IntegrationWarning as exc:
                raise KernelError(f"Laplace quadrature failed at lambda={lam}: {exc}") from exc
        return out


# ---------------------------------------------------------------------------
# Factories
# ---------------------------------------------------------------------------

def heat_kernel(k0: float = 1.0) -> MemoryKernel:
    """k1 = 0: no memory, k = k0."""
    return MemoryKernel(k0=k0, name="heat", params={})


def exponential_kernel(k0: float = 1.0, amplitude: float = 1.0, rate: float = 1.0) -> MemoryKernel:
    """k1(t) = amplitude * exp(-rate * t)."""
    if amplitude == 0.0:
        return heat_kernel(k0)
    if not (amplitude > 0 and rate > 0):
        raise KernelError("exponential kernel needs amplitude > 0 and rate > 0")
    a, b = float(amplitude), float(rate)
    return MemoryKernel(
        k0=k0,
        k1=lambda t: a * np.exp(-b * np.asarray(t, dtype=float)),
        k1_prime=lambda t: -a * b * np.exp(-b * np.asarray(t, dtype=float)),
        name="exponential",
        params={"amplitude": a, "rate": b},
        k1_integral=lambda t: (a / b) * -np.expm1(-b * np.asarray(t, dtype=float)),
        rho_closed=lambda t: (a / b) * np.exp(-b * np.asarray(t, dtype=float)),
        laplace_k1_closed=lambda lam: a / (lam + b),
    )


def singular_kernel(k0: float = 1.0, gamma: float = 0.5, rate: float = 1.0,
                    amplitude: float = 1.0) -> MemoryKernel:
    """k1(t) = amplitude * exp(-rate * t) * t**-gamma, 0 <= gamma < 1."""
    if not 0.0 <= gamma < 1.0:
        raise KernelError("gamma must lie in [0, 1)")
    if not (amplitude > 0 and rate > 0):
        raise KernelError("singular kernel needs amplitude > 0 and rate > 0")
    c, b, g = float(amplitude), float(rate), float(gamma)
    s = 1.0 - g
    scale = c * b ** (-s) * gamma_fn(s)

    def k1(t):
        t = np.asarray(t, dtype=float)
        return c * np.exp(-b * t) * t ** (-g)

    def k1p(t):
        t = np.asarray(t, dtype=float)
        return -c * np.exp(-b * t) * (b * t ** (-g) + g * t ** (-g - 1.0))

    return MemoryKernel(
        k0=k0,
        k1=k1,
        k1_prime=k1p,
        singularity_exponent=g,
        name="singular",
        params={"amplitude": c, "rate": b, "gamma": g},
        k1_integral=lambda t: scale * gammainc(s, b * np.asarray(t, dtype=float)),
        rho_closed=lambda t: scale * gammaincc(s, b * np.asarray(t, dtype=float)),
        laplace_k1_closed=lambda lam: c * gamma_fn(s) * (lam + b) ** (-s),
        k1_regular=lambda t: c * np.exp(-b * np.asarray(t, dtype=float)),
    )


def callable_kernel(k0: float, k1: Callable, gamma: float = 0.0,
                    k1_prime: Optional[Callable] = None, name: str = "callable") -> MemoryKernel:
    """Kernel from a user density; every transform is computed numerically."""
    return MemoryKernel(k0=k0, k1=k1, k1_prime=k1_prime, singularity_exponent=gamma, name=name)


def _power_exp_moments(lam, h, n_max=3):
    """I_n = int_0^h u**n exp(-lam u) du for n = 0..n_max; lam and h broadcast."""
    lam, h = np.broadcast_arrays(np.asarray(lam, dtype=complex), np.asarray(h, dtype=float))
    z = lam * h
    out = np.empty((n_max + 1,) + z.shape, dtype=complex)
    small = np.abs(z) < 1.0
    # series in z where the closed form cancels
    zs = np.where(small, z, 0.0)
    for n in range(n_max + 1):
        term = np.ones_like(zs)
        acc = term / (n + 1)
        for k in range(1, 30):
            term = term * (-zs) / k
            acc = acc + term / (n + k + 1)
        out[n] = h ** (n + 1) * acc
    zb = np.where(small, 1.0, z)
    lb = np.where(small, 1.0, lam)
    e = np.exp(-zb)
    partial = np.zeros_like(zb)
    term = np.ones_like(zb)
    for n in range(n_max + 1):
        if n:
            term = term * zb / n
        partial = partial + term
        closed = math.factorial(n) / lb ** (n + 1) * (1.0 - e * partial)
        out[n] = np.where(small, out[n], closed)
    return out


def _cubic_laplace(breaks, coef, lam):
    """Laplace transform of a piecewise cubic; coef[k, i] multiplies (t - breaks[i])**(3 - k)."""
    lam = np.asarray(lam, dtype=complex)
    h = np.diff(breaks)
    flat = lam.ravel()[:, None]
    mom = _power_exp_moments(flat, h[None, :])           # (4, L, pieces)
    pieces = sum(coef[3 - n][None, :] * mom[n] for n in range(4))
    total = np.sum(np.exp(-flat * breaks[None, :-1]) * pieces, axis=1)
    return total.reshape(lam.shape)


def table_kernel(k0: float, t, values, gamma: float = 0.0) -> MemoryKernel:
    """Tabulated density, interpolated monotonically in t**gamma * k1(t).

    Beyond the last abscissa the density is taken to be zero.
    """
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0) or t[0] <= 0:
        raise KernelError("table abscissae must be positive and strictly increasing")
    if values.shape != t.shape:
        raise KernelError("table values must match abscissae")
    reg = PchipInterpolator(t, t**gamma * values, extrapolate=True)
    t_last = t[-1]

    def g_part(s):
        s = np.asarray(s, dtype=float)
        inside = s <= t_last
        return np.where(inside, reg(np.minimum(np.maximum(s, 0.0), t_last)), 0.0)

    def k1(s):
        s = np.asarray(s, dtype=float)
        return g_part(s) * s ** (-gamma) if gamma > 0 else g_part(s)

    closed = None
    if gamma == 0:
        # the interpolant's first cubic also covers (0, t[0])
        head = [reg.derivative(3 - k)(0.0) / math.factorial(3 - k) if k < 3 else reg(0.0) for k in range(4)]
        breaks = np.concatenate([[0.0], t])
        coef = np.concatenate([np.array(head)[:, None], reg.c], axis=1)

        def closed(lam):
            return _cubic_laplace(breaks, coef, lam)

    return MemoryKernel(
        k0=k0,
        k1=k1,
        singularity_exponent=gamma,
        name="table",
        laplace_k1_closed=closed,
        params={"t": t.tolist(), "k1": values.tolist()},
        k1_regular=g_part,
        support=float(t_last),
    )


def kernel_from_config(spec: Mapping) -> MemoryKernel:
    """Build a kernel from ``{type, k0, parameters, gamma}``."""
    kind = spec.get("type")
    k0 = float(spec.get("k0", 1.0))
    params = dict(spec.get("parameters", {}))
    gamma = float(spec.get("gamma", params.pop("gamma", 0.0)))
    if kind == "heat":
        return heat_kernel(k0)
    if kind == "exponential":
        return exponential_kernel(k0, params.get("amplitude", 1.0), params.get("rate", 1.0))
    if kind == "singular":
        return singular_kernel(k0, gamma, params.get("rate", 1.0), params.get("amplitude", 1.0))
    if kind == "table":
        return table_kernel(k0, params["t"], params["k1"], gamma)
    raise KernelError(f"unknown kernel type {kind!r}")


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def eval_k1(kernel: MemoryKernel, t):
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise KernelError("k1 is only defined for t > 0")
    out = kernel.density(t_arr)
    return float(out) if np.ndim(t) == 0 else out


def _numeric_rho(kernel: MemoryKernel, t: float) -> float:
    g = kernel.singularity_exponent
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            total = 0.0
            split = max(1.0, t)
            if t < 1.0:
                if g > 0:
                    head, _ = integrate.quad(
                        kernel.regular_part, t, 1.0, weight="alg", wvar=(-g, 0.0),
                        epsrel=RHO_RTOL, limit=200,
                    ) if t == 0.0 else integrate.quad(
                        kernel.density, t, 1.0, epsrel=RHO_RTOL, limit=200)
                else:
                    head, _ = integrate.quad(kernel.density, t, 1.0, epsrel=RHO_RTOL, limit=200)
                total += head
            tail, _ = integrate.quad(kernel.density, split, np.inf, epsrel=RHO_RTOL, limit=500)
            total += tail
        except integrate.IntegrationWarning as exc:
            raise KernelError(f"tail quadrature of k1 did not converge at t={t}: {exc}") from exc
    if not math.isfinite(total):
        raise KernelError("k1 is not integrable")
    return total


def rho(kernel: MemoryKernel, t):
    """rho(t) = int_t^inf k1(s) ds."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise KernelError("rho is defined for t >= 0")
    if kernel.is_zero:
        out = np.zeros_like(t_arr)
    elif kernel.rho_closed is not None:
        out = np.asarray(kernel.rho_closed(t_arr), dtype=float)
    else:
        out = np.vectorize(lambda s: _numeric_rho(kernel, float(s)), otypes=[float])(t_arr)
    return float(out) if np.ndim(t) == 0 else out


def laplace_k(kernel: MemoryKernel, lam):
    """k^(lambda) = k0/lambda + k1^(lambda)/lambda for Re lambda > 0."""
    lam_arr = np.asarray(lam, dtype=complex)
    if np.any(lam_arr.real <= 0):
        raise KernelError("Laplace transform requires Re(lambda) > 0")
    out = (kernel.k0 + kernel.laplace_k1(lam_arr)) / lam_arr
    return complex(out) if np.ndim(lam) == 0 else out


@dataclass(frozen=True)
class SectorialityReport:
    theta: float
    delta: float
    scan_grid: Array
    attained_at: float
    form: str
    boundary: bool
    warnings: tuple = ()

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "delta": self.delta,
            "attained_at": self.attained_at,
            "form": self.form,
            "boundary": self.boundary,
            "warnings": list(self.warnings),
            "scan": [float(self.scan_grid[0]), float(self.scan_grid[-1]), int(self.scan_grid.size)],
        }


def _arg_profile(kernel: MemoryKernel, omega, form: str, eps: float):
    lam = eps + 1j * np.asarray(omega, dtype=float)
    measure = kernel.k0 + kernel.laplace_k1(lam)
    if form == "measure":
        return np.abs(np.angle(measure))
    if form == "literal":
        return np.abs(np.angle(measure / lam))
    raise KernelError(f"unknown sectoriality form {form!r}")


def sectoriality(kernel: MemoryKernel, scan=DEFAULT_SCAN, form: str = "measure",
                 eps: float = SCAN_EPS) -> SectorialityReport:
    """Sup of |arg| of the kernel transform along Re(lambda) = eps.

    ``form="measure"`` scans lambda * k^(lambda) = k0 + k1^(lambda), the
    transform of the measure dk; ``form="literal"`` scans k^(lambda) itself,
    whose angle is at least pi/2 for every creep function.
    """
    w_min, w_max, n = scan
    omega = np.geomspace(w_min, w_max, int(n))
    vals = _arg_profile(kernel, omega, form, eps)
    i = int(np.argmax(vals))
    theta, at = float(vals[i]), float(omega[i])
    notes = []
    if 0 < i < omega.size - 1 and theta > 0:
        lo, hi = np.log(omega[i - 1]), np.log(omega[i + 1])
        res = optimize.minimize_scalar(
            lambda x: -_arg_profile(kernel, np.exp(x), form, eps),
            bounds=(lo, hi), method="bounded", options={"xatol": 1e-10},
        )
        if -res.fun > theta:
            theta, at = float(-res.fun), float(np.exp(res.x))
    elif theta > 0:
        notes.append("supremum attained at a scan endpoint; resolution limited")
    delta = 1.0 + 2.0 * theta / math.pi
    boundary = not (1.0 < delta < 2.0)
    if boundary:
        notes.append(f"delta={delta:.6g} lies on or outside the open interval (1, 2)")
    return SectorialityReport(theta, delta, omega, at, form, boundary, tuple(notes))


@dataclass
class KernelValidationReport:
    checks: dict
    fd_derivative: bool
    rho0: float

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "fd_derivative": self.fd_derivative,
            "rho0": self.rho0,
            "checks": self.checks,
        }


def _first_violation(grid, mask):
    idx = np.flatnonzero(mask)
    return None if idx.size == 0 else float(grid[idx[0]])


def validate_kernel(kernel: MemoryKernel, grid) -> KernelValidationReport:
    """Check creep hypotheses h1-h3 on a sampled grid."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 3 or grid[0] <= 0 or np.any(np.diff(grid) <= 0):
        raise KernelError("validation grid must be strictly increasing and start at t_min > 0")
    checks = {}

    try:
        rho0 = rho(kernel, 0.0)
        ok = math.isfinite(rho0)
        checks["h1"] = {"passed": ok, "first_violation": None,
                        "detail": f"rho(0) = {rho0:.12g}"}
    except KernelError as exc:
        rho0 = float("inf")
        checks["h1"] = {"passed": False, "first_violation": None, "detail": str(exc)}

    k1 = kernel.density(grid)
    neg = k1 < 0
    incr = np.concatenate([[False], np.diff(k1) > 0])
    bad = neg | incr
    checks["h2"] = {"passed": not bad.any(), "first_violation": _first_violation(grid, bad),
                    "detail": "k1 >= 0 and nonincreasing"}

    m = -kernel.density_prime(grid)
    # a finite-difference k1' carries roundoff of size eps |k1| / h; its divided
    # differences are only tested above that floor
    noise = (8.0 * np.finfo(float).eps * np.abs(k1) / (FD_REL_STEP * grid)
             if kernel.fd_derivative else np.zeros_like(grid))
    d1 = np.diff(m)
    floor1 = CONVEXITY_SLACK + noise[1:] + noise[:-1]
    not_noninc = np.concatenate([[False], d1 > floor1])
    dx = np.diff(grid)
    slopes = d1 / dx
    dd2 = 2.0 * np.diff(slopes) / (grid[2:] - grid[:-2])
    floor2 = CONVEXITY_SLACK + 2.0 * floor1[1:] / (dx[1:] * (grid[2:] - grid[:-2])) \
        + 2.0 * floor1[:-1] / (dx[:-1] * (grid[2:] - grid[:-2]))
    not_convex = np.concatenate([[False], dd2 < -floor2, [False]])
    bad3 = not_noninc | not_convex
    checks["h3"] = {"passed": not bad3.any(), "first_violation": _first_violation(grid, bad3),
                    "detail": "-k1' nonincreasing and convex"}
    return KernelValidationReport(checks, kernel.fd_derivative, float(rho0))

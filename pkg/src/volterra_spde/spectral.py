"""Dirichlet Laplacian eigenpairs on model domains and the noise spectrum."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.fft import dst

__all__ = [
    "SpectralError",
    "SpectralBasis",
    "TraceReport",
    "dirichlet_eigenvalues",
    "noise_spectrum",
    "make_basis",
    "basis_from_config",
    "trace_condition",
    "default_trace_theta",
    "to_physical",
    "to_spectral",
    "physical_grid",
]

DOMAINS = ("interval", "rectangle")


class SpectralError(ValueError):
    pass


def dirichlet_eigenvalues(domain: str, N: int) -> np.ndarray:
    """First N eigenvalues of -Laplacian with Dirichlet data, with multiplicity.

    interval (0, pi): j**2.  square (0, pi)**2: sorted j**2 + m**2.
    """
    if N < 1:
        raise SpectralError("N must be at least 1")
    if domain == "interval":
        return np.arange(1, N + 1, dtype=float) ** 2
    if domain == "rectangle":
        # every value <= R**2 is produced once j, m <= R
        R = 1
        while R * R < N + 1 or _count_below(R) < N:
            R += 1
        j = np.arange(1, R + 1)
        vals = np.sort((j[:, None] ** 2 + j[None, :] ** 2).ravel())
        return vals[:N].astype(float)
    raise SpectralError(f"unsupported domain {domain!r}")


def _count_below(R):
    # lattice points (j, m >= 1) with j**2 + m**2 <= R**2
    j = np.arange(1, R + 1)
    return int(np.sum(np.floor(np.sqrt(np.maximum(R * R - j * j, 0)))))


def noise_spectrum(mu, q: float, scale: float = 1.0) -> np.ndarray:
    """lambda_j = scale * mu_j**-q."""
    if q < 0:
        raise SpectralError("q must be nonnegative")
    if not scale > 0:
        raise SpectralError("scale must be positive")
    return scale * np.asarray(mu, dtype=float) ** (-q)


@dataclass(frozen=True)
class SpectralBasis:
    domain: str
    mu: np.ndarray
    lam: np.ndarray
    noise: Optional[dict] = field(default=None)

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        lam = np.asarray(self.lam, dtype=float)
        if self.domain not in DOMAINS and self.domain != "table":
            raise SpectralError(f"unsupported domain {self.domain!r}")
        if mu.ndim != 1 or mu.size == 0 or mu.shape != lam.shape:
            raise SpectralError("mu and lambda must be equal-length vectors")
        if mu[0] <= 0 or np.any(np.diff(mu) < 0):
            raise SpectralError("mu must be positive and nondecreasing")
        if np.any(lam < 0):
            raise SpectralError("lambda must be nonnegative")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "lam", lam)

    @property
    def N(self) -> int:
        return int(self.mu.size)

    def truncate(self, n: int) -> "SpectralBasis":
        return SpectralBasis(self.domain, self.mu[:n], self.lam[:n], self.noise)

    def describe(self) -> dict:
        return {"domain": self.domain, "N": self.N, "noise": self.noise,
                "mu": self.mu.tolist(), "lambda": self.lam.tolist()}


def make_basis(domain: str, N: int, q: float = 0.0, scale: float = 1.0) -> SpectralBasis:
    mu = dirichlet_eigenvalues(domain, N)
    return SpectralBasis(domain, mu, noise_spectrum(mu, q, scale), {"q": q, "scale": scale})


def basis_from_config(spec) -> SpectralBasis:
    """``{domain, N, noise: {q, scale}}`` or a ``table`` with explicit spectra."""
    domain = spec.get("domain", "interval")
    if domain == "table":
        return SpectralBasis("table", np.asarray(spec["mu"]), np.asarray(spec["lambda"]))
    noise = spec.get("noise", {})
    return make_basis(domain, int(spec["N"]), float(noise.get("q", 0.0)),
                      float(noise.get("scale", 1.0)))


def default_trace_theta(delta: float, step: float = 0.05) -> float:
    """Smallest multiple of ``step`` strictly above delta - 1 (and below 1)."""
    k = max(1, math.ceil((delta - 1.0) / step - 1e-9))
    while 1.0 + round(k * step, 12) <= delta:
        k += 1
    theta = k * step
    if theta >= 1.0:
        raise SpectralError(f"no admissible theta in (delta - 1, 1) for delta={delta}")
    return round(theta, 12)


@dataclass
class TraceReport:
    exponent: float
    terms: np.ndarray
    partial_sums: np.ndarray
    tail_bound: float
    verdict: str

    def rows(self):
        return [(j + 1, float(t), float(s))
                for j, (t, s) in enumerate(zip(self.terms, self.partial_sums))]

    def to_dict(self) -> dict:
        return {"exponent": self.exponent, "tail_bound": self.tail_bound,
                "verdict": self.verdict, "partial_sum": float(self.partial_sums[-1]),
                "rows": self.rows()}


def trace_condition(basis: SpectralBasis, theta: float, delta: float) -> TraceReport:
    """Partial sums of lambda_j / mu_j**((1 + theta)/delta - 1) with a tail bound."""
    if not 0.0 < theta < 1.0:
        raise SpectralError("theta must lie in (0, 1)")
    if not 1.0 + theta > delta:
        raise SpectralError(f"need 1 + theta > delta, got theta={theta}, delta={delta}")
    p = (1.0 + theta) / delta - 1.0
    terms = basis.lam / basis.mu**p
    partial = np.cumsum(terms)
    noise = basis.noise
    if basis.domain == "table" or noise is None:
        return TraceReport(p, terms, partial, float("nan"), "undetermined")
    q, scale = float(noise["q"]), float(noise["scale"])
    s = q + p  # terms are scale * mu**-s
    N = basis.N
    if basis.domain == "interval":
        alpha = 2.0 * s
        if alpha <= 1.0:
            return TraceReport(p, terms, partial, float("inf"), "diverges")
        tail = scale * N ** (1.0 - alpha) / (alpha - 1.0)
    else:
        if s <= 1.0:
            return TraceReport(p, terms, partial, float("inf"), "diverges")
        M = basis.mu[-1]
        tail = scale * s * (math.pi / 4.0) * M ** (1.0 - s) / (s - 1.0)
    return TraceReport(p, terms, partial, float(tail), "converges")


# ---------------------------------------------------------------------------
# Pseudo-spectral transforms on the interval (0, pi)
# ---------------------------------------------------------------------------

def physical_grid(n_phys: int) -> np.ndarray:
    """Interior points x_m = m pi / (n_phys + 1)."""
    return np.arange(1, n_phys + 1) * math.pi / (n_phys + 1)


def to_physical(coeffs, n_phys: int) -> np.ndarray:
    """Evaluate sum_j c_j e_j(x_m), e_j = sqrt(2/pi) sin(j x), on the interior grid.

    ``coeffs`` has the mode index on the last axis.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    N = coeffs.shape[-1]
    if n_phys < N:
        raise SpectralError("physical grid must have at least N points")
    padded = np.zeros(coeffs.shape[:-1] + (n_phys,))
    padded[..., :N] = coeffs
    # DST-I: y_m = 2 sum_j c_j sin(pi j m / (n+1))
    return dst(padded, type=1, axis=-1) * (0.5 * math.sqrt(2.0 / math.pi))


def to_spectral(values, N: int) -> np.ndarray:
    """Discrete projections <u, e_j> for j = 1..N from interior samples."""
    values = np.asarray(values, dtype=float)
    n_phys = values.shape[-1]
    h = math.pi / (n_phys + 1)
    full = dst(values, type=1, axis=-1) * (0.5 * h * math.sqrt(2.0 / math.pi))
    return full[..., :N]

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from volterra_spde.kernels import (KernelError, callable_kernel, eval_k1, exponential_kernel, heat_kernel,
                                   kernel_from_config, laplace_k, rho, sectoriality, singular_kernel,
                                   table_kernel, validate_kernel)

GRID = np.geomspace(1e-3, 30.0, 600)


def test_eval_k1_closed_forms():
    assert eval_k1(exponential_kernel(), 1.0) == pytest.approx(math.exp(-1), rel=1e-15)
    assert eval_k1(singular_kernel(1.0, 0.5), 1.0) == pytest.approx(math.exp(-1), rel=1e-15)


@pytest.mark.parametrize("t", [0.0, -1.0])
def test_eval_k1_rejects_nonpositive_time(t):
    with pytest.raises(KernelError):
        eval_k1(exponential_kernel(), t)


def test_rho_oracles():
    assert rho(exponential_kernel(), 0.0) == pytest.approx(1.0)
    assert rho(exponential_kernel(), 2.0) == pytest.approx(math.exp(-2))
    assert rho(heat_kernel(), 3.0) == 0.0
    assert rho(singular_kernel(1.0, 0.5), 0.0) == pytest.approx(math.sqrt(math.pi), rel=1e-10)


def test_numeric_rho_matches_closed_form_for_singular_density():
    closed = singular_kernel(1.0, 0.5)
    numeric = callable_kernel(1.0, lambda t: np.exp(-t) / np.sqrt(t), gamma=0.5)
    for t in [0.0, 0.1, 1.0, 4.0]:
        assert rho(numeric, t) == pytest.approx(rho(closed, t), rel=1e-9)


def test_rho_derivative_is_minus_k1():
    k = singular_kernel(1.0, 0.3, rate=2.0)
    t = np.linspace(0.2, 5.0, 25)
    h = 1e-5
    d = (rho(k, t + h) - rho(k, t - h)) / (2 * h)
    assert np.allclose(d, -k.density(t), rtol=1e-6)
    assert np.all(np.diff(rho(k, np.linspace(0, 5, 50))) <= 0)


def test_laplace_oracles():
    assert laplace_k(heat_kernel(1.0), 2.0) == pytest.approx(0.5)
    assert laplace_k(exponential_kernel(), 1.0) == pytest.approx(1.5)
    numeric = callable_kernel(1.0, lambda t: np.exp(-t) / np.sqrt(t), gamma=0.5)
    expected = math.sqrt(math.pi) / math.sqrt(4.0)
    assert numeric.laplace_k1(3.0) == pytest.approx(expected, rel=1e-9)
    with pytest.raises(KernelError):
        laplace_k(exponential_kernel(), -1.0)


@given(st.floats(0.1, 10.0), st.floats(0.05, 20.0), st.floats(-20.0, 20.0))
def test_laplace_scales_linearly(c, re, im):
    k = singular_kernel(0.7, 0.4, 1.3)
    lam = complex(re, im)
    assert laplace_k(k.scaled(c), lam) == pytest.approx(c * laplace_k(k, lam), rel=1e-13)


@given(st.floats(0.01, 50.0))
def test_laplace_real_axis_is_real_positive(x):
    v = laplace_k(exponential_kernel(1.0, 2.0, 0.5), x)
    assert v.real > 0 and abs(v.imag) == 0.0


def test_sectoriality_exponential_kernel():
    rep = sectoriality(exponential_kernel())
    assert 1.0 < rep.delta < 2.0
    assert rep.delta == 1.0 + 2.0 * rep.theta / math.pi
    assert rep.theta == pytest.approx(0.33984, abs=1e-4)
    dense = sectoriality(exponential_kernel(), scan=(1e-4, 1e6, 4000))
    assert abs(dense.delta - rep.delta) < 1e-4


def test_sectoriality_scale_invariant():
    k = singular_kernel(1.0, 0.5)
    assert abs(sectoriality(k.scaled(7.3)).theta - sectoriality(k).theta) < 1e-12


def test_sectoriality_heat_kernel_is_boundary():
    assert sectoriality(heat_kernel()).boundary
    literal = sectoriality(heat_kernel(), form="literal")
    assert literal.theta == pytest.approx(math.pi / 2, abs=1e-6)


def test_validate_kernel_examples():
    assert validate_kernel(exponential_kernel(), GRID).passed
    assert validate_kernel(singular_kernel(1.0, 0.5), GRID).passed
    bump = callable_kernel(1.0, lambda t: np.where(t < np.pi, np.sin(t), 0.0))
    rep = validate_kernel(bump, GRID)
    assert not rep.checks["h2"]["passed"]
    assert rep.checks["h2"]["first_violation"] is not None
    poly = callable_kernel(1.0, lambda t: (1.0 + t) ** -2.0)
    rep = validate_kernel(poly, GRID)
    assert rep.passed and rep.fd_derivative


def test_validate_kernel_bad_grid():
    with pytest.raises(KernelError):
        validate_kernel(exponential_kernel(), [0.0, 1.0, 2.0])


def test_table_kernel_reproduces_density():
    t = np.linspace(0.01, 40, 4000)
    k = table_kernel(1.0, t, np.exp(-t))
    assert rho(k, 0.5) == pytest.approx(math.exp(-0.5), rel=1e-5)


def test_config_round_trip():
    k = kernel_from_config({"type": "singular", "k0": 2.0, "gamma": 0.25, "parameters": {"rate": 3.0}})
    assert k.k0 == 2.0 and k.singularity_exponent == 0.25
    with pytest.raises(KernelError):
        kernel_from_config({"type": "nope"})
    with pytest.raises(KernelError):
        heat_kernel(0.0)


def test_table_laplace_matches_piecewise_quadrature():
    from scipy import integrate
    t = np.linspace(0.01, 5.0, 200)
    k = table_kernel(1.0, t, np.exp(-t * t))
    br = np.concatenate([[0.0], t])
    for lam in (0.5, 1 + 3j, 1e-8 + 1e-4j):
        parts = [integrate.quad(lambda x, f=f: f(k.density(x) * np.exp(-lam * x)), a, b, epsabs=1e-15,
                                epsrel=1e-13)[0]
                 for a, b in zip(br[:-1], br[1:]) for f in (np.real, np.imag)]
        ref = sum(parts[0::2]) + 1j * sum(parts[1::2])
        assert abs(k.laplace_k1(lam) - ref) < 1e-12
    assert np.isfinite(k.laplace_k1(1e-8 + 5e3j))

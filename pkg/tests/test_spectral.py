import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from volterra_spde.spectral import (SpectralBasis, SpectralError, default_trace_theta, dirichlet_eigenvalues,
                                    make_basis, noise_spectrum, physical_grid, to_physical, to_spectral,
                                    trace_condition)


def test_eigenvalue_examples():
    assert dirichlet_eigenvalues("interval", 3).tolist() == [1, 4, 9]
    assert dirichlet_eigenvalues("rectangle", 4).tolist() == [2, 5, 5, 8]
    assert dirichlet_eigenvalues("interval", 1).tolist() == [1]
    with pytest.raises(SpectralError):
        dirichlet_eigenvalues("disk", 3)


def test_rectangle_against_brute_force():
    j = np.arange(1, 40)
    brute = np.sort((j[:, None] ** 2 + j[None, :] ** 2).ravel())[:150]
    assert np.array_equal(dirichlet_eigenvalues("rectangle", 150), brute)


def test_noise_spectrum_examples():
    mu = dirichlet_eigenvalues("interval", 5)
    assert np.all(noise_spectrum(mu, 0.0) == 1.0)
    assert np.allclose(noise_spectrum(mu, 1.0), 1.0 / np.arange(1, 6) ** 2)
    assert np.allclose(noise_spectrum([1, 4], 2.0, 3.0), [3.0, 0.1875])


def test_basis_invariants():
    with pytest.raises(SpectralError):
        SpectralBasis("interval", [4.0, 1.0], [1.0, 1.0])
    with pytest.raises(SpectralError):
        SpectralBasis("interval", [1.0, 4.0], [1.0, -1.0])


def test_trace_condition_examples():
    b = make_basis("interval", 200, q=1.0)
    rep = trace_condition(b, 0.9, 1.5)
    assert rep.exponent == pytest.approx(1.9 / 1.5 - 1.0)
    assert rep.verdict == "converges"
    flat = make_basis("interval", 200, q=0.0)
    assert trace_condition(flat, 0.5 + 1e-3, 1.5).verdict == "diverges"
    with pytest.raises(SpectralError):
        trace_condition(b, 0.4, 1.5)


def test_trace_tail_bound_controls_cauchy_gap():
    small = trace_condition(make_basis("interval", 50, q=1.0), 0.9, 1.5)
    big = trace_condition(make_basis("interval", 100, q=1.0), 0.9, 1.5)
    assert big.tail_bound < small.tail_bound
    assert big.partial_sums[-1] - small.partial_sums[-1] < small.tail_bound


@given(st.floats(0.01, 100.0))
def test_trace_verdict_scale_invariant(scale):
    b = make_basis("interval", 30, q=1.0, scale=scale)
    ref = trace_condition(make_basis("interval", 30, q=1.0), 0.6, 1.4)
    rep = trace_condition(b, 0.6, 1.4)
    assert rep.verdict == ref.verdict
    assert np.allclose(rep.partial_sums, scale * ref.partial_sums)


def test_default_theta():
    assert default_trace_theta(1.21635) == pytest.approx(0.25)
    assert default_trace_theta(1.2) == pytest.approx(0.25)


def test_physical_round_trip():
    rng = np.random.default_rng(1)
    c = rng.normal(size=(3, 12))
    v = to_physical(c, 64)
    assert v.shape == (3, 64)
    assert np.allclose(to_spectral(v, 12), c, atol=1e-12)
    x = physical_grid(64)
    assert np.allclose(v[0], (c[0][:, None] * np.sqrt(2 / np.pi) * np.sin(np.arange(1, 13)[:, None] * x)).sum(0))

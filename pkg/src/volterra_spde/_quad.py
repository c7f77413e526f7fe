"""Small quadrature helpers shared by the kernel and resolvent code."""

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@lru_cache(maxsize=None)
def gauss_legendre_unit(n):
    """Nodes and weights of the n-point Gauss-Legendre rule on [0, 1]."""
    x, w = roots_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def gauss_jacobi_unit(n, beta):
    """Rule for int_0^1 x**beta f(x) dx with beta > -1.

    For an interval [0, h] the integral int_0^h x**beta f(x) dx equals
    h**(1 + beta) * sum(w * f(h * x)).
    """
    if beta == 0.0:
        return gauss_legendre_unit(n)
    x, w = roots_jacobi(n, 0.0, beta)
    return 0.5 * (x + 1.0), w / 2.0 ** (1.0 + beta)


def graded_nodes(T, n_intervals, grading, t_start=0.0):
    """Nodes t_i = t_start + (T - t_start) * (i / n)**grading."""
    u = np.linspace(0.0, 1.0, n_intervals + 1)
    return t_start + (T - t_start) * u ** grading

"""Power-law fits of resolvent quantities against mu_j for the exponential kernel.

Prints the fitted exponent of int_0^T int_0^tau s_j^2 for several horizons T
next to candidate reference exponents, and the exact two-pole value for
comparison.  Usage: python scripts/scaling_study.py [--modes 20] [--T 1 2 5 20]
"""

import argparse

import numpy as np

from volterra_spde.kernels import exponential_kernel, sectoriality
from volterra_spde.resolvent import (TimeGrid, double_square_integral, estimate_suite, fit_power_law,
                                     solve_decayed, solve_scalar_resolvent)
from volterra_spde.spectral import default_trace_theta, dirichlet_eigenvalues


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--modes", type=int, default=20)
    ap.add_argument("--T", type=float, nargs="+", default=[1.0, 2.0, 5.0, 20.0])
    ap.add_argument("--nodes-per-unit", type=int, default=1000)
    args = ap.parse_args()

    k = exponential_kernel()
    sec = sectoriality(k)
    mu = dirichlet_eigenvalues("interval", args.modes)
    trace_theta = default_trace_theta(sec.delta)
    print(f"theta {sec.theta:.5f}  delta {sec.delta:.5f}")
    print(f"reference -(1+theta)/delta with sectoriality theta: {-(1 + sec.theta) / sec.delta:.4f}")
    print(f"reference -(1+theta)/delta with trace theta {trace_theta:g}: {-(1 + trace_theta) / sec.delta:.4f}")

    ints = [estimate_suite(solve_decayed(float(m), k, mode=j + 1))["int_abs_s"] for j, m in enumerate(mu)]
    print(f"int |s_j| exponent: {fit_power_law(mu, ints):.4f}  (reference -1/delta = {-1 / sec.delta:.4f})")

    print("T      double-square exponent")
    for T in args.T:
        grid = TimeGrid.uniform(T, max(200, int(round(args.nodes_per_unit * T))))
        vals = [double_square_integral(solve_scalar_resolvent(float(m), k, grid), T) for m in mu]
        print(f"{T:<6g} {fit_power_law(mu, vals):.4f}")


if __name__ == "__main__":
    main()

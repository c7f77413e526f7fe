"""LQ benchmark: LSMC value and feedback against the Riccati oracle over path counts."""

import argparse
import math
import time

import numpy as np

from volterra_spde.control import (SimSpec, cost_functional, fbsde_solve, lq_problem, lq_riccati_oracle,
                                   policy_gain)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, nargs="+", default=[1000, 3000, 10_000])
    ap.add_argument("--steps", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--degree", type=int, default=2)
    args = ap.parse_args()

    p = lq_problem()
    oracle = lq_riccati_oracle(0.0, 1.0, 1.0, 0.0, 1.0)
    V = oracle["optimal_cost"]
    print(f"Riccati optimal cost {V:.6f}, P(0) {oracle['P0']:.6f}")
    print("paths   Y0        err     rollout   err     gain ratio  iters  seconds")
    for n in args.paths:
        start = time.perf_counter()
        spec = SimSpec(args.seed, n, args.steps)
        res = fbsde_solve(p, spec, degree=args.degree)
        roll = cost_functional(p, res.policy, spec, seed_offset=1)["J_estimate"]
        dt = 1.0 / args.steps
        window = [i for i in range(1, args.steps) if 0.4 <= i * dt <= 0.6]
        ratio = np.mean([policy_gain(res.policy, i, 1.0, math.sqrt(i * dt))
                         / -np.interp(i * dt, oracle["t"], oracle["P"]) for i in window])
        el = time.perf_counter() - start
        print(f"{n:<7d} {res.Y0:.5f}  {abs(res.Y0 / V - 1):6.2%}  {roll:.5f}  {abs(roll / V - 1):6.2%}  "
              f"{ratio:10.3f}  {res.iterations:5d}  {el:7.2f}")


if __name__ == "__main__":
    main()

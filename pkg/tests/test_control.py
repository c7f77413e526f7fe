import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from volterra_spde.control import (AffineStructure, ControlError, ControlProblem, SimSpec, cost_functional,
                                   fbsde_solve, girsanov_weight, hamiltonian, heat_tracking_problem,
                                   lq_problem, lq_riccati_oracle, open_loop_piecewise, policy_gain, problem_from_config,
                                   verify_value_lower_bound)
from volterra_spde.kernels import exponential_kernel, heat_kernel, singular_kernel


def scalar_problem(ell, phi=lambda X: np.zeros(X.shape[0]), U=(-2.0, 2.0), affine=None, T=1.0, mu=0.0):
    return ControlProblem(
        mu=[mu], lam=[1.0], kernel=heat_kernel(), T=T, x0=[1.0], U=U, affine=affine,
        r=lambda t, X, g: np.broadcast_to(np.asarray(g, dtype=float)[..., None], X.shape),
        ell=ell, phi=phi, r_bound=max(abs(U[0]), abs(U[1])))


NONCONVEX = scalar_problem(lambda t, X, g: np.cos(3 * np.asarray(g)) + 0.1 * np.asarray(g) ** 2 + X[:, 0] ** 2)


def brute_force(problem, t, X, Z, n=200_001):
    grid = np.linspace(*problem.U, n)
    vals = [problem.ell(t, np.repeat(X[None], n, 0), grid) + Z[0] * grid]
    return float(np.min(vals))


def test_lq_hamiltonian_closed_form():
    p = lq_problem()
    X = np.array([[0.5], [-1.0], [2.0]])
    Z = np.array([[1.0], [-4.0], [30.0]])
    out = hamiltonian(p, 0.0, X, Z)
    g = np.clip(-Z[:, 0] / 2, -10, 10)
    assert np.allclose(out["gamma_star"], g)
    assert np.allclose(out["psi_value"], X[:, 0] ** 2 + g ** 2 + Z[:, 0] * g)
    assert np.allclose(hamiltonian(p, 0.0, X, 0 * Z)["psi_value"], X[:, 0] ** 2)


@pytest.mark.parametrize("z", [-3.0, -0.4, 0.0, 0.7, 2.5])
def test_nonconvex_hamiltonian_matches_brute_force(z):
    X = np.array([0.3])
    out = hamiltonian(NONCONVEX, 0.0, X[None], np.array([[z]]))
    assert abs(out["psi_value"][0] - brute_force(NONCONVEX, 0.0, X, np.array([z]))) < 1e-4


@given(x=st.floats(-3, 3), z=st.floats(-5, 5))
def test_minimizer_beats_every_grid_control(x, z):
    X, Z = np.array([[x]]), np.array([[z]])
    out = hamiltonian(NONCONVEX, 0.0, X, Z)
    grid = np.linspace(-2, 2, 401)
    vals = NONCONVEX.ell(0.0, np.repeat(X, grid.size, 0), grid) + z * grid
    assert out["psi_value"][0] <= vals.min() + 1e-9
    assert -2 <= out["gamma_star"][0] <= 2


@given(z1=st.floats(-20, 20), z2=st.floats(-20, 20))
def test_hamiltonian_lipschitz_in_z(z1, z2):
    p = lq_problem(U=(-3.0, 3.0))
    X = np.array([[0.2]])
    a = hamiltonian(p, 0.0, X, np.array([[z1]]))["psi_value"][0]
    b = hamiltonian(p, 0.0, X, np.array([[z2]]))["psi_value"][0]
    assert abs(a - b) <= p.r_bound * abs(z1 - z2) + 1e-9


def test_linear_cost_picks_smaller_endpoint_on_ties():
    p = scalar_problem(lambda t, X, g: np.zeros(X.shape[0]),
                       affine=AffineStructure(lambda t, X: np.zeros(X.shape[0]), lambda t, X: np.zeros(X.shape[0]),
                                              0.0, lambda t, X: np.zeros_like(X), lambda t, X: np.ones_like(X)))
    g = hamiltonian(p, 0.0, np.zeros((3, 1)), np.array([[1.0], [0.0], [-1.0]]))["gamma_star"]
    assert list(g) == [-2.0, -2.0, 2.0]


def test_girsanov_weight_identities():
    rng = np.random.default_rng(0)
    P, K, dt, c = 20_000, 20, 0.05, 0.8
    dW = rng.standard_normal((P, K, 1)) * math.sqrt(dt)
    assert np.all(girsanov_weight(np.zeros((P, K, 1)), dW, dt) == 1.0)
    w = girsanov_weight(np.full((P, K, 1), c), dW, dt)
    assert abs(w.mean() - 1) < 3 * w.std(ddof=1) / math.sqrt(P)
    assert abs(np.log(w).mean() + c * c * K * dt / 2) < 0.02


def test_zero_costs_give_zero_value():
    p = scalar_problem(lambda t, X, g: np.zeros(X.shape[0]))
    assert cost_functional(p, 1.5, SimSpec(0, 100, 10))["J_estimate"] == 0.0


def test_constant_terminal_cost_gives_constant_value():
    c = 2.5
    p = scalar_problem(lambda t, X, g: np.asarray(g, dtype=float) ** 2, phi=lambda X: np.full(X.shape[0], c),
                       affine=AffineStructure(lambda t, X: np.zeros(X.shape[0]), lambda t, X: np.zeros(X.shape[0]),
                                              1.0, lambda t, X: np.zeros_like(X), lambda t, X: np.ones_like(X)))
    res = fbsde_solve(p, SimSpec(3, 4000, 10), degree=1)
    assert abs(res.Y0 - c) < 1e-2
    z = res.policy.z(0.5, np.array([[0.0], [1.0]]))
    assert np.all(np.abs(z) < 0.3)


def test_decoupled_cost_has_zero_value_and_control():
    p = lq_problem(q=0.0, p_T=0.0)
    res = fbsde_solve(p, SimSpec(1, 2000, 10))
    assert abs(res.Y0) < 1e-3 and res.converged
    assert cost_functional(p, res.policy, SimSpec(2, 500, 10))["J_estimate"] < 1e-3


def test_girsanov_matches_direct_for_zero_control():
    p = heat_tracking_problem(exponential_kernel(), n=2)
    spec = SimSpec(4, 500, 20)
    d = cost_functional(p, 0.0, spec, method="direct")
    g = cost_functional(p, 0.0, spec, method="girsanov")
    assert abs(d["J_estimate"] - g["J_estimate"]) < 1e-12
    assert g["mean_weight"] == 1.0


def test_riccati_oracles():
    zero = lq_riccati_oracle(0.0, 1.0, 0.0, 0.0, 1.0)
    assert np.all(zero["P"] == 0)
    tanh = lq_riccati_oracle(0.0, 1.0, 1.0, 0.0, 1.0)
    assert np.max(np.abs(tanh["P"] - np.tanh(1.0 - tanh["t"]))) < 1e-10
    coarse = lq_riccati_oracle(-0.5, 1.0, 1.0, 0.3, 1.0, dt=2e-4)["P0"]
    fine = lq_riccati_oracle(-0.5, 1.0, 1.0, 0.3, 1.0, dt=1e-4)["P0"]
    assert abs(coarse - fine) < 1e-8
    with pytest.raises(ControlError):
        lq_riccati_oracle(1.0, 1.0, 1.0, -5.0, 2.0, dt=1e-3)


@pytest.fixture(scope="module")
def lq_solution():
    p = lq_problem()
    return p, fbsde_solve(p, SimSpec(0, 10_000, 50))


def test_lq_value_and_gain_match_riccati(lq_solution):
    p, res = lq_solution
    oracle = lq_riccati_oracle(0.0, 1.0, 1.0, 0.0, 1.0)
    assert res.converged
    assert abs(res.Y0 / oracle["optimal_cost"] - 1) < 0.05
    # single-step slopes scatter by ~20%; average over t in [0.4, 0.6] on the visited range X ~ 1 +- sqrt(t)
    dt = p.T / 50
    ratios = [policy_gain(res.policy, i, 1.0, math.sqrt(i * dt)) / (-oracle["P"][int(round(i * dt / 1e-4))])
              for i in range(20, 31)]
    assert abs(np.mean(ratios) - 1) < 0.1
    assert all(not d["rank_deficient"] for d in res.diagnostics)


def test_worse_controls_cost_more(lq_solution):
    p, res = lq_solution
    assert cost_functional(p, 3.0, SimSpec(7, 2000, 50))["J_estimate"] > res.Y0
    bound = verify_value_lower_bound(p, res.Y0, 5, SimSpec(0, 2000, 50))
    assert bound["violations"] == 0 and len(bound["rows"]) == 5


def test_piecewise_control_and_validation():
    c = open_loop_piecewise([1.0, 2.0, 3.0], 3.0)
    assert (c(0.0), c(1.5), c(2.99), c(3.0)) == (1.0, 2.0, 3.0, 3.0)
    v = lq_problem(p_T=0.5).validate()
    assert v["r_bounded"] and v["phi_growth_ok"]


def test_rejected_inputs():
    with pytest.raises(ControlError):
        heat_tracking_problem(singular_kernel())
    with pytest.raises(ControlError):
        lq_problem(a=0.5)
    with pytest.raises(ControlError):
        cost_functional(lq_problem(), 0.0, SimSpec(0, 4, 2), method="euler")
    with pytest.raises(ControlError):
        problem_from_config({"name": "pendulum"})
    blow = scalar_problem(lambda t, X, g: np.where(X[:, 0] > 1.5, np.inf, 0.0))
    with pytest.raises(ControlError, match="path"):
        cost_functional(blow, 0.0, SimSpec(0, 50, 5))

"""Heat conduction with memory: resolvents, stochastic evolution and control."""

__version__ = "0.1.0"

from .kernels import (MemoryKernel, exponential_kernel, heat_kernel, kernel_from_config, rho,
                      sectoriality, singular_kernel, table_kernel, validate_kernel)
from .spectral import SpectralBasis, make_basis, trace_condition
from .resolvent import (ScalarResolvent, TimeGrid, estimate_suite, solve_decayed, solve_scalar_resolvent)
from .evolution import HistoryState, quasi_dissipativity_form, semigroup_apply
from .stochastic import (NoiseSpec, nonlinearity, sample_stochastic_convolution, simulate_mild_solution)
from .control import ControlProblem, fbsde_solve, hamiltonian, lq_problem, lq_riccati_oracle
from .config import ExperimentConfig

__all__ = [
    "MemoryKernel", "exponential_kernel", "heat_kernel", "kernel_from_config", "rho", "sectoriality",
    "singular_kernel", "table_kernel", "validate_kernel", "SpectralBasis", "make_basis",
    "trace_condition", "ScalarResolvent", "TimeGrid", "estimate_suite", "solve_decayed",
    "solve_scalar_resolvent", "HistoryState", "quasi_dissipativity_form", "semigroup_apply",
    "NoiseSpec", "nonlinearity", "sample_stochastic_convolution", "simulate_mild_solution",
    "ControlProblem", "fbsde_solve", "hamiltonian", "lq_problem", "lq_riccati_oracle",
    "ExperimentConfig",
]

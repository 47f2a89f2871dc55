"""Two-time quantum action principle: discretized wave equation toolkit."""

__version__ = "0.1.0"

from .action import (PrefactorConvention, ResidualField, canonical_part_continuum,
                     canonical_part_discrete, hamiltonian_matrix_tiny, hamiltonian_part,
                     residual_W_chi, scalar_part_lambda)
from .chi import (ChiCoefficients, ChiValue, eval_chi, free_particle_chi,
                  reconstruct_wavefunctional, split_s_r)
from .energy import EnergyEstimate, estimate_energy
from .grid import Constants, TimeGrid, Trajectory, bind_constants, make_grid, sample_collocation
from .kernel import (KernelConfig, coulomb_action_term, coulomb_time_integral, interval_squared,
                     regularized_delta)
from .solver import SolveReport, gradient_check, solve

__all__ = [
    "ChiCoefficients", "ChiValue", "Constants", "EnergyEstimate", "KernelConfig",
    "PrefactorConvention", "ResidualField", "SolveReport", "TimeGrid", "Trajectory",
    "bind_constants", "canonical_part_continuum", "canonical_part_discrete",
    "coulomb_action_term", "coulomb_time_integral", "estimate_energy", "eval_chi",
    "free_particle_chi", "gradient_check", "hamiltonian_matrix_tiny", "hamiltonian_part",
    "interval_squared", "make_grid", "reconstruct_wavefunctional", "regularized_delta",
    "residual_W_chi", "sample_collocation", "scalar_part_lambda", "solve", "split_s_r",
]

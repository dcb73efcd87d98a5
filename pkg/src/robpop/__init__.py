"""Robust control of bounded jump-diffusion population dynamics.

Solves the worst-case (ambiguity-distorted) dynamic-programming equation with
a monotone implicit finite-difference scheme, extracts the optimal
intervention and distortion fields, estimates the long-run effective
Hamiltonian, and cross-validates values against direct Monte Carlo simulation
of the distorted dynamics.
"""

from .grid import Mesh, TimeGrid, build_mesh, build_time_grid, interp_weights
from .jump_ops import (JumpQuadrature, apply_expectation, apply_nonlocal,
                       build_jump_quadrature, entropy_penalty)
from .local_ops import (ControlSample, hamiltonian, lambda_field, optimal_lambda,
                        optimal_q, q_field)
from .mc import (JumpSampler, PathBatch, SimConfig, ValueEstimate,
                 make_jump_sampler, sample_jump_size, simulate_paths,
                 simulate_value)
from .model import (JumpDensity, ProblemSpec, TabulatedFunction, ValidationResult,
                    make_paper_spec, point_mass_density, tabulated,
                    tabulated_density, uniform_density, validate_spec, with_psi)
from .solver import (ControlField, ControlTable, ErgodicReport, PolicyConfig,
                     PolicyIterationError, SchemeError, SingularSystemError,
                     Snapshot, SolveResult, TridiagonalSystem, ValueField,
                     assemble_system, build_scheme, ergodic_estimate,
                     solve_backward, solve_many, step_backward,
                     switching_points, thomas_solve)

__version__ = "0.1.0"

__all__ = [
    "Mesh", "TimeGrid", "build_mesh", "build_time_grid", "interp_weights",
    "JumpQuadrature", "apply_expectation", "apply_nonlocal",
    "build_jump_quadrature", "entropy_penalty",
    "ControlSample", "hamiltonian", "lambda_field", "optimal_lambda",
    "optimal_q", "q_field",
    "JumpSampler", "PathBatch", "SimConfig", "ValueEstimate",
    "make_jump_sampler", "sample_jump_size", "simulate_paths", "simulate_value",
    "JumpDensity", "ProblemSpec", "TabulatedFunction", "ValidationResult",
    "make_paper_spec", "point_mass_density", "tabulated", "tabulated_density",
    "uniform_density", "validate_spec", "with_psi",
    "ControlField", "ControlTable", "ErgodicReport", "PolicyConfig",
    "PolicyIterationError", "SchemeError", "SingularSystemError", "Snapshot",
    "SolveResult", "TridiagonalSystem", "ValueField", "assemble_system",
    "build_scheme", "ergodic_estimate", "solve_backward", "solve_many",
    "step_backward", "switching_points", "thomas_solve",
]

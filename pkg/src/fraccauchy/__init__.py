"""Fractional powers of elliptic operators by the pseudo-time Cauchy method.

Solves A^alpha v = psi (0 < alpha < 1) for a P1 finite-element operator by
integrating B(t) w' + (A - delta) w = 0 over t in [0, 1] with weighted
two-level and three-level difference schemes.
"""
from .assembly import CoefficientField, assemble_mass, assemble_seminorm, assemble_stiffness, \
    assemble_system, model_coefficients, project_rhs
from .cauchy import CauchyProblem, EvolutionTrace, Init, InvalidDelta, Scheme, StepTooLarge, \
    energy, init_corrected_explicit, init_explicit_euler, init_fine_grid, init_symmetric, \
    initial_state, run_three_level, run_two_level, sigma_opt, three_level_step, two_level_step
from .mesh import Mesh, build_uniform_mesh, triangle_geometry
from .oracle import EigenDecomposition, dense_generalized_eig, exact_evolution, \
    fractional_apply, lambda_min
from .sparse import ConvergenceError, SparseMatrix, cg_solve, estimate_operator_norm, \
    linear_combine, spmv

__version__ = "0.1.0"

"""Bifurcation analysis for a nonlocal-diffusion predator-prey style system.

    -a(∫v) Δu = λu - u² + b u v,    -Δv + σv = ρu,    u = v = 0 on the boundary.
"""

from .continuation import (Branch, BranchPoint, ContinuationError, ContinuationSettings,
                           HomotopyError, continue_branch, epsilon_homotopy, initial_tangent,
                           measure_direction)
from .mesh import Mesh, build_mesh, integrate, laplacian
from .model import (DiffusionLaw, Direction, ProblemParams, State, apriori_bounds,
                    bifurcation_point, bound_case, classify_direction, direction_threshold,
                    kernel_basis, nonexistence_threshold, residual)
from .nonlinear import (LinearSolveError, NewtonError, NewtonSettings, SingularOperatorError,
                        SolveOutcome, VanishingDenominatorError, assemble_jacobian,
                        multistart_probe, newton_solve, solve_rank_one)
from .spectral import EigenPair, EigenSolverError, dirichlet_eigenpair, principal_eigenpair, solve_e_sigma
from .verify import VerifyReport, check_all, classify

__version__ = "0.1.0"

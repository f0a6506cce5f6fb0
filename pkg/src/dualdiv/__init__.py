"""Optimal dividend barriers for the dual risk model with surplus dependent costs."""

from .barrier_value import (BarrierSolution, solve_barrier, solve_ub_fredholm, solve_vb_fredholm,
                            solve_vb_ode, vb_via_duality)
from .classical_exit import (ClassicalModel, ExitFunctions, compute_g, compute_gtilde, compute_w,
                             compute_z, exit_functions, injections_until_exit, laplace_exit_reflected)
from .errors import (DegenerateBarrierError, DomainError, DualDivError, ExistenceError,
                     GridMismatchError, SolverError, TruncationError, ValidationError)
from .grid import GridFunction
from .hjb import CandidateValue, HjbReport, apply_generator, verify_hjb
from .model import (CostFunction, JumpLaw, ModelParams, eval_cost, partial_expectation,
                    table1_params, validate)
from .optimal_barrier import OptimalBarrierReport, check_existence, check_optimality, \
    check_zero_barrier, find_beta_star, gamma
from .simulator import (PathResult, SimConfig, SimEstimate, estimate_value, simulate_classical_exit,
                        simulate_path, time_to_zero)

__version__ = "0.1.0"

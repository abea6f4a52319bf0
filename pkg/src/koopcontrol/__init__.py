"""Polynomial transition-map solver for two-point boundary-value problems.

The pipeline: polynomial dynamics are lifted onto a normalized Legendre
basis over a domain box, the generator matrix propagates observables to
the time of flight, the resulting polynomial boundary map is inverted by
fixed-point composition, and initial costates come out as a single map
evaluation per boundary pair.  Truth integration and two direct solvers
(linear closed form, damped-Newton shooting) verify every answer.
"""

from .basis import BasisSpec, DomainBox, expand_in_basis, inner_product, project
from .koopman import (KoopmanDecompositionError, KoopmanModel,
                      build_koopman_matrix, build_observable_matrix,
                      legendre_to_monomial)
from .mapinv import (MapInversionError, TpbvpMap, build_tpbvp_map, invert_map,
                     invert_tpbvp, solve_costates)
from .models import (CwConfig, DuffingParams, Lagrangian, cw_dynamics,
                     cw_lagrangian, duffing_acceleration, duffing_dynamics,
                     euler_lagrange, potential_polynomial,
                     potential_term_rational, scale_costates, scale_state,
                     scale_time, unscale_costates, unscale_state,
                     unscale_time)
from .ocp import AugmentedSystem, augment_energy_optimal, control_history
from .oracles import (OracleError, Trajectory, control_effort, integrate,
                      shooting_oracle, stm_costate_oracle, terminal_error)
from .polynomial import MultiPoly, PolyMap, TruncatedAlgebra, map_compose
from .scenario import (Pipeline, Scenario, ScenarioError, SolveReport,
                       build_problem, run_compare, run_grid, run_sweep)
from .solver import KoopmanBvpSolver

__version__ = "0.1.0"

__all__ = [
    "AugmentedSystem",
    "BasisSpec",
    "CwConfig",
    "DomainBox",
    "DuffingParams",
    "KoopmanBvpSolver",
    "KoopmanDecompositionError",
    "KoopmanModel",
    "Lagrangian",
    "MapInversionError",
    "MultiPoly",
    "OracleError",
    "Pipeline",
    "PolyMap",
    "Scenario",
    "ScenarioError",
    "SolveReport",
    "TpbvpMap",
    "Trajectory",
    "TruncatedAlgebra",
    "augment_energy_optimal",
    "build_koopman_matrix",
    "build_observable_matrix",
    "build_problem",
    "build_tpbvp_map",
    "control_effort",
    "control_history",
    "cw_dynamics",
    "cw_lagrangian",
    "duffing_acceleration",
    "duffing_dynamics",
    "euler_lagrange",
    "expand_in_basis",
    "inner_product",
    "integrate",
    "invert_map",
    "invert_tpbvp",
    "legendre_to_monomial",
    "map_compose",
    "potential_polynomial",
    "potential_term_rational",
    "project",
    "run_compare",
    "run_grid",
    "run_sweep",
    "scale_costates",
    "scale_state",
    "scale_time",
    "shooting_oracle",
    "solve_costates",
    "stm_costate_oracle",
    "terminal_error",
    "unscale_costates",
    "unscale_state",
    "unscale_time",
    "__version__",
]

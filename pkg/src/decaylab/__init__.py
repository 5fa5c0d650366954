"""decaylab: steepness-weighted interpolation inequalities and decay rates
of the degenerate diffusion u_t = u^p Lap(u), probed numerically.

Subpackages:

* ``steepness``  - the slowly-varying gauge functions L and their analytic checks
* ``radial``     - grids, quadrature, norms, radial Laplacian
* ``gn``         - Gagliardo-Nirenberg-type ratio evaluation and family scans
* ``evolution``  - regularized Dirichlet evolutions and the minimal-solution ladder
* ``bounds``     - steady states, separated subsolutions, decay envelopes
* ``rates``      - decay-rate fits and calibrated bound persistence
* ``cli``        - JSON-config experiment orchestration
"""

from .errors import (BudgetError, DecayLabError, InputError, LadderError,
                     NumericError, SchemeError)
from .steepness import (ConvexityReport, HypothesisReport, SteepnessFunction,
                        check_convexity_condition, check_near_multiplicativity,
                        check_ratio_bound, solve_transcendental,
                        transcendental_calibration)
from .radial import (RadialGrid, RadialProfile, WeightedIntegral, grad_l2_norm,
                     lq_quasinorm, radial_laplacian, steepness_integral)
from .gn import (FamilySpec, FamilyScan, GNRequest, classical_gn_ratio,
                 family_scan, interpolation_ratio, power_integrability_check,
                 steepness_gn_ratio)
from .evolution import (ApproxParams, EvolutionRun, LadderResult, ProblemSpec,
                        evolve, linfty_from_lq_check, lyapunov_series,
                        minimal_solution_ladder, observer_lq, observer_lyapunov,
                        semiconvexity_check, step)
from .bounds import (CompensatedFrame, DecayEnvelope, SteadyState,
                     SubsolutionReport, SubsolutionSpec, build_subsolution,
                     compensated_frame, evaluate_steady_state, logistic_exact,
                     logistic_residual, lower_bound_curve, scale_steady_state,
                     solve_steady_state, steady_state_residual, subsolution_check)
from .rates import (BaselineReport, BoundCheck, RateFit, SandwichVerdict,
                    baseline_check, fit_decay, lower_bound_persistence,
                    lq_upper_bound_check, sandwich_report, upper_bound_check)

__version__ = "0.1.0"

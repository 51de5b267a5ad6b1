"""randskew: row-sampling sketches, inversion-bias correction, and
sketched second-order solvers."""

from .errors import (AllTrialsSingular, AllZeroRows, ConfigError,
                     IndexOutOfRange, LabelDomainError, NoConvergence,
                     NotPositiveDefinite, NotPowerOfTwo, ParseError,
                     RandskewError, SketchTooSmall,
                     ZeroProbabilityWithPositiveScore)
from .linalg import (cholesky, gram, inv_sqrt, psd_relative_error,
                     solve_spd, spd_inverse, spectral_norm, sqrt_psd)
from .sampling import (ApproxFactors, PlanKind, SamplingPlan, SketchDraw,
                       apply_sketch, approximation_factors, build_plan,
                       draw, effective_dimension, exact_leverage_scores,
                       full_draw, sjlt_approx_leverage)
from .hadamard import (SrhtDraw, fwht_inplace, next_power_of_two,
                       rotated_leverage_scores, srht_apply, srht_draw)
from .debias import (DebiasMode, DebiasSpec, FixedPointD, apply_debias,
                     fine_grained_weights, scalar_factor,
                     solve_fixed_point_d)
from .biaslab import (BiasEstimate, BiasSweepRow, SrhtScheme, bias_sweep,
                      estimate_bias, gaussian_sketch, make_debias_spec)
from .data import (DataSource, SyntheticKind, SyntheticSpec,
                   counterexample_matrix, load_data)
from .optim import (GdMethod, GlmProblem, NewtonExactMethod, ProblemKind,
                    RunTrace, SgdMethod, SparseProjMethod, SsnConfig,
                    SsnMethod, StepRule, newton_exact, objective_eval,
                    reference_solution, run_solver, ssn_step,
                    analytic_step_size)

__version__ = "0.1.0"

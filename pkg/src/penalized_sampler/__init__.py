"""Penalized Langevin and Hamiltonian Monte Carlo for targets on convex bodies."""

from .data import Dataset, dirichlet_oracle, gen_linear, load_csv, save_csv, standardize
from .diagnostics import (mse_series, projected_gradient_map, sliced_w2, tv_histogram,
                          violation_stats, w2_1d)
from .errors import (ConvergenceFailure, DataParseError, DivergenceError, InternalConsistencyError,
                     InvalidArgument, NumericalFailure, PenalizedSamplerError, SchemaError,
                     UnsupportedPenalty)
from .geometry import (DistanceSquared, Functional, L2Ball, LinfBall, LpBall, Polytope,
                       RegularizedFunctional, Simplex, affine_constraint, body_from_dict,
                       lp_norm_constraint, penalty_constants, penalty_eval, project, regularize)
from .potentials import (GradientOracle, LeastSquaresPotential, Potential, gaussian_potential,
                         make_dirichlet_potential, make_least_squares, zero_potential)
from .samplers import (HmcConfig, LangevinConfig, SampleBatch, StepSchedule, hmc_run,
                       integrator_coeffs, langevin_run, noise_covariance, run)
from .theory import kl_quadrature, penalized_constants, schedule_for, wckp_bound

__version__ = "0.1.0"

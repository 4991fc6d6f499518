"""Accelerated stochastic mirror descent for composite finite sums."""

from .baselines import run_apg, run_fista, run_pgd, run_spgd
from .bregman import Entropy, Euclidean, bregman_distance, three_point_residual
from .data import (Dataset, build_group_lasso_problem, build_lasso_problem, chain_groups,
                   generate_synthetic_lasso, load_libsvm, save_libsvm)
from .problem import (CallableFamily, ComponentFunction, FiniteSumProblem, Indicator, L1Norm,
                      LeastSquares, OverlapGroupNorm, Zero, lipschitz_summary)
from .prox import (OverlapGroups, ProxCertificationError, ProxResult, overlap_penalty_value, prox_entropy_simplex,
                   prox_indicator, prox_l1, prox_overlap_group, soft_threshold)
from .saddle import SaddleProblem, run_saddle
from .sets import Box, FullSpace, Simplex
from .smoothing import (BoxQuadraticMax, ScalarSmoother, SimplexEntropyMax, SmoothedHinge,
                        SmoothedMaxFamily, scalar_smooth_value_grad, smoothed_hinge_component,
                        smoothed_lipschitz, smoothed_max_value_grad)
from .solver import AlphaSchedule, Asmd, AsmdConfig, EpsilonSchedule, alpha_at, reduced_gradient, run
from .trace import SolverTrace, read_trace_csv

__version__ = "0.1.0"

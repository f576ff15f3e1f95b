"""Sequential hypothesis tests for finite-state Markov chains.

Generalized likelihood-ratio tests of composite classes of transition
kernels, the weighted-KL projections behind them, Poisson-equation and
pseudo-spectral-gap tools, and instance-dependent lower bounds on the
expected stopping time.
"""

from __future__ import annotations

from .bounds import BoundReport, one_sided_lower_bound, two_sided_lower_bounds
from .divergence import (
    binary_kl,
    d_m,
    kl,
    pinsker_bound,
    pinsker_ratio,
    row_kl,
    surrogate_statistic,
    weighted_kl,
)
from .errors import SeqmctError
from .markov import (
    TransitionKernel,
    exponential_tilt,
    is_ergodic,
    l1_inf_distance,
    random_kernel,
    simulate,
    stationary_distribution,
    validate_distribution,
    validate_kernel,
)
from .nullsets import (
    FiniteUnion,
    LinearClass,
    NullSet,
    ParametricInterval,
    ProjectionResult,
    Singleton,
    StationaryPolytope,
    d_m_inf,
    membership_residual,
    project_weighted_kl,
)
from .poisson import poisson_series, pseudo_spectral_gap, sensitivity_constant, solve_poisson
from .sequential import TestConfig, TwoSidedConfig, run_alpha_sweep, run_one_sided, run_two_sided, threshold

__version__ = "0.1.0"

"""Rare-event simulation toolkit for multivariate compound Hawkes processes."""

from .config import dump_spec, load_bundled, load_spec, spec_from_dict, spec_to_dict
from .estimate import (
    EstimatorResult,
    LikelihoodBreakdown,
    StoppingRule,
    estimate_exceedance_is,
    estimate_exceedance_mc,
    estimate_ruin_is,
    estimate_ruin_mc,
    estimate_union,
    log_likelihood_ratio,
    speedup_ratio,
)
from .model import (
    DecayKernel,
    DeterministicLaw,
    Dimensions,
    ExponentialKernel,
    ExponentialLaw,
    ModelSpec,
    TabulatedKernel,
    branching_matrix,
    event_rate,
    mean_drift,
    spectral_radius,
    validate_net_profit,
    validate_stability,
)
from .numerics import DEFAULT_NUMERICS, NumericsConfig
from .optimize import TwistSolution, dominant_point, legendre_transform, solve_theta_star
from .simulate import (
    ClusterSample,
    Event,
    HawkesSimulator,
    PathSample,
    compensator,
    derive_run_seed,
    simulate_cluster,
    simulate_hawkes,
    simulate_until_ruin,
)
from .transforms import (
    CumulantEval,
    DomainBoundary,
    PgfSolution,
    claim_mgf_vector,
    cluster_pgf_jacobian,
    cumulant_gradient,
    domain_boundary,
    limiting_cumulant,
    marginal_cumulants,
    solve_cluster_pgf,
)
from .twist import TwistedModel, build_twisted_model, twist_consistency_check

__version__ = "0.1.0"

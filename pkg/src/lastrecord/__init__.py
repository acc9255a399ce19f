"""Optimal stopping for the last record of a stick-breaking record process."""
from ._backend import BACKEND
from .factor import (
    DIST_SPECS,
    AtomicFactor,
    Beta,
    ContinuousFactor,
    Delta,
    FactorDistribution,
    GeometricAtoms,
    IntervalSpace,
    ProductOfUniforms,
    RngStream,
    Uniform,
    parse_dist,
)
from .special import BracketError, DomainError, QuadratureError, find_root, incomplete_gamma, integrate
from .stopping import (
    BThreshold,
    TimeThreshold,
    WeightThreshold,
    entrance_moments,
    p0,
    p1,
    parse_policy,
    solve_threshold,
    tau1_cdf,
)
from .value import optimal_value, policy_value, solve_delay_ode, value_beta, value_delta
from .simulate import SimConfig, evaluate_discrete, evaluate_policy, sample_chain_records
from .uniform import stop_time_density, winning_rate

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

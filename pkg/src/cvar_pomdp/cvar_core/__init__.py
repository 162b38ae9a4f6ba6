"""Distribution-level CVaR estimation, concentration bounds and CDF envelopes."""

from .concentration import (
    AuxBounds,
    Branch,
    BranchPair,
    SampleAuxBounds,
    aux_cvar_bounds,
    aux_cvar_bounds_from_samples,
    brown_bounds,
    ecdf_concentration_bounds,
    ecdf_lower_bound,
    ecdf_upper_bound,
    lower_branch,
    shifted_lower,
    shifted_upper,
    thomas_lower_bound,
    thomas_upper_bound,
    upper_branch,
)
from .envelopes import GridFunction, cumulative_gap, envelope_cdf_from_density_gap, envelope_cdf_lower
from .estimators import (
    cdf_cvar,
    cdf_tail_integral,
    cdf_var,
    empirical_cvar,
    empirical_var,
    eq9_objective,
    tail_integral,
)
from .oracles import DistributionOracle, gmm_moments, ks_distance, oracle_cvar
from .types import DiscreteCdf, RiskParams, SortedSample, check_alpha, check_unit, dkw_radius

__all__ = [
    "AuxBounds",
    "Branch",
    "BranchPair",
    "DiscreteCdf",
    "DistributionOracle",
    "GridFunction",
    "RiskParams",
    "SampleAuxBounds",
    "SortedSample",
    "aux_cvar_bounds",
    "aux_cvar_bounds_from_samples",
    "brown_bounds",
    "cdf_cvar",
    "cdf_tail_integral",
    "cdf_var",
    "check_alpha",
    "check_unit",
    "cumulative_gap",
    "dkw_radius",
    "ecdf_concentration_bounds",
    "ecdf_lower_bound",
    "ecdf_upper_bound",
    "empirical_cvar",
    "empirical_var",
    "envelope_cdf_from_density_gap",
    "envelope_cdf_lower",
    "eq9_objective",
    "gmm_moments",
    "ks_distance",
    "lower_branch",
    "oracle_cvar",
    "shifted_lower",
    "shifted_upper",
    "tail_integral",
    "thomas_lower_bound",
    "thomas_upper_bound",
    "upper_branch",
]

"""Monte Carlo estimators over independent replicate environments."""

from .blocks import (BlockLayout, BlockResult, LindebergResult, block_decomposition, default_layout, lindeberg_layout,
                     lindeberg_sum)
from .common import THREADS_ENV, EnvSource, ceil_even, floor_even, replicate_map, resolve_threads
from .coupling import CouplingDemo, couple_demo
from .endpoint import (CLTResult, LDPResult, VarianceCurve, clear_memo, clt_sample, endpoint_samples, ldp_check,
                       variance_curve)
from .lln import (ExcursionResult, LLNCurve, LLNEstimate, NearVerticalResult, estimate_lln_gap,
                  excursion_identity_check, near_vertical_gap, power_rule)
from .perturbation import (EfronSteinResult, InfluenceResult, efron_stein_sum, influence_profile,
                           row_maximum_quantile)
from .pinning import ProbabilityCurve, midpoint_log_tail, midpoint_tail, pinning_curve

__all__ = [
    "BlockLayout", "BlockResult", "LindebergResult", "block_decomposition", "default_layout",
    "lindeberg_layout", "lindeberg_sum", "THREADS_ENV", "EnvSource", "ceil_even", "floor_even",
    "replicate_map", "resolve_threads", "CouplingDemo", "couple_demo", "CLTResult", "LDPResult",
    "VarianceCurve", "clear_memo", "clt_sample", "endpoint_samples", "ldp_check", "variance_curve",
    "ExcursionResult", "LLNCurve", "LLNEstimate", "NearVerticalResult", "estimate_lln_gap",
    "excursion_identity_check", "near_vertical_gap", "power_rule", "EfronSteinResult", "InfluenceResult",
    "efron_stein_sum", "influence_profile", "row_maximum_quantile", "ProbabilityCurve", "midpoint_log_tail",
    "midpoint_tail", "pinning_curve",
]

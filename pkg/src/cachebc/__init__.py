"""Cache-aided K-user MISO broadcast: performance bounds and delivery simulation."""

from .analysis import (
    DcsitLoad,
    NoDeliveryNeeded,
    PerformancePoint,
    SystemParams,
    achievable_T_best,
    achievable_T_simple,
    alpha_breakpoint,
    alpha_max_needed,
    csit_reduction,
    dcsit_load,
    dof,
    dof_log_approx,
    evaluate,
    gamma_substitute,
    gap,
    gap_scan,
    lower_bound_T,
    select_eta,
    sum_dof_upper,
    zf_load,
)
from .combinatorics import enumerate_subsets, harmonic, replace_member, subsets_containing
from .delivery import SimReport, build_schedule, make_combiners, simulate
from .scheme import (
    CacheContents,
    FoldedMessage,
    InfeasibleSplit,
    Library,
    SplitPlan,
    fold,
    make_library,
    place,
    plan_split,
    residual_demands,
)

__version__ = "0.1.0"

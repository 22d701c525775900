"""Simultaneous optimal transport: one plan moving several measures at once."""
from .errors import *  # noqa: F401,F403
from .fixed_target import (
    DualPotentials,
    FixedTargetResult,
    SOTInstance,
    build_sot_lp,
    check_potentials,
    classical_ot_cost,
    dual_potentials,
    solve_fixed,
)
from .free_target import FreeTargetResult, MixingCandidate, enumerate_minimal_subsets, refine_targets, simplex_embed, solve_free
from .measure import (
    DEFAULT_TOL,
    FREE,
    SQUARED_EUCLIDEAN,
    DiscreteMeasure,
    FeasibilityReport,
    MeasureFamily,
    Tolerances,
    TransportPlan,
    barycentric_function,
    build_family,
    check_plan,
    conditional_on_target,
    constancy_regions,
    cost_matrix,
    dirac,
    plan_cost,
    product_plan,
)
from .oracles import (
    brute_force_free_target,
    check_c_monotone,
    check_cyclic_monotonicity,
    recover_potential,
)

__version__ = "0.1.0"

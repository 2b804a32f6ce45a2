"""Percolation on rooted trees: exact truncation computations, electrical
networks, divergence diagnostics and an event-driven edge-flip simulator."""

from .trees import (
    ChildSequence,
    GeneralTree,
    GrowthEnvelope,
    LevelSizes,
    SpineAttachment,
    SpineTree,
    TreeTruncation,
    from_spec,
    glue_at_root,
    glue_symmetric_copies,
    level_size,
    load_tree,
    save_tree,
    truncate,
)
from .networks import (
    KIND_CUSTOM,
    KIND_DYNAMICAL,
    KIND_PERCOLATION,
    NORM_LYONS,
    NORM_PLAIN,
    Bracket,
    EffectiveConductanceSeq,
    UnitFlow,
    WeightedNetwork,
    conductance_bracket,
    conductance_sequence,
    custom_network,
    effective_conductance_reduce,
    effective_conductance_ss,
    energy_by_level,
    energy_by_level_ss,
    flow_energy,
    level_conductance,
    min_energy_unit_flow,
    network,
)
from .percolation import (
    MCEstimate,
    PcEstimate,
    SandwichReport,
    ThetaBracket,
    ThetaCurve,
    branching_pc,
    lyons_sandwich,
    spine_theta_lower,
    theta_curve,
    theta_limit,
    theta_mc,
    theta_truncated,
)
from .criteria import (
    CONVERGENT,
    DIVERGENT,
    INCONCLUSIVE,
    VERDICT_EXCEPTIONAL,
    VERDICT_INCONCLUSIVE,
    VERDICT_NONE,
    DivergenceDiagnosis,
    ExceptionalTimesVerdict,
    InapplicableError,
    cstar_zero_test,
    energy_bound_chain,
    exceptional_times_verdict,
    fubini_closed_form,
    fubini_identity_check,
    integral_reciprocal_theta,
    series_criterion_ss,
)
from .constructions import (
    ContrastPairResult,
    GrowthTarget,
    ThetaFloorResult,
    binary_tree,
    constant_tree,
    contrast_pair,
    fast_takeoff_spine,
    growth_tree,
    n_two_n_tree,
    ss_tree_with_growth,
    theta_floor_tree,
    two_n_log_n_tree,
)
from .dynamics import (
    CrosscheckReport,
    MarginalReport,
    SwitchStats,
    Timeline,
    connectivity_crosscheck,
    edge_marginal_check,
    occupation_fraction,
    simulate,
    switch_statistics,
)

__version__ = "0.1.0"

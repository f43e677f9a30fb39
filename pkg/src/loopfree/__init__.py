"""Transiently loop-free update scheduling for two-policy network updates.

The toolkit models an old and a new forwarding path over shared switches,
decides which switches may update together without ever creating a
forwarding loop (strong mode) or a loop reachable from the source (relaxed
mode), computes full update schedules with exact and approximate per-round
solvers, generates hardness gadget instances from hitting-set problems,
and replays schedules under randomized asynchronous orderings.
"""

from .errors import (
    CapExceeded,
    CorrespondenceViolation,
    EndpointMismatch,
    InfeasibleInstance,
    InstanceSyntaxError,
    InvalidSchedule,
    LoopfreeError,
    NoSafeNode,
    NodeSetMismatch,
    NonSimplePath,
    NotAForest,
    NotInitialState,
    NotPending,
    TimeBudgetExceeded,
    TooManyLeaves,
    UnsafeRound,
)
from .model import (
    EdgeClass,
    RoundState,
    UpdateInstance,
    UpdateSchedule,
    WalkResult,
    active_walk,
    apply_round,
    branch_tags,
    classify_edge,
    classify_pending,
    interesting_nodes,
    is_forest,
    leaf_count,
    make_instance,
    parse_instance,
    parse_schedule,
    render_instance,
    render_schedule,
)
from .safety import (
    RLF,
    SLF,
    SafetyVerdict,
    mode_safe,
    oracle_safe,
    rlf_safe,
    slf_safe,
    union_graph,
)
from .cycles import enumerate_simple_cycles
from .hitting import HittingSetInstance, solve_hitting_set
from .schedulers import (
    ExactResult,
    SolverLimits,
    cycle_hitting_approx,
    exact_max_round,
    fallback_single,
    first_round,
    full_schedule,
    majority_approx,
    masp_cycle_analysis,
    two_leaf_rlf,
    two_leaf_slf,
)
from .gadgets import (
    CorrespondenceReport,
    GadgetEdge,
    GadgetLayout,
    generate_gadget,
    render_layout,
    verify_correspondence,
)
from .simulate import (
    DelayModel,
    SimulationConfig,
    SimulationReport,
    SplitMix64,
    TraceResult,
    Violation,
    exhaustive_round_violation,
    render_report,
    simulate,
    trace_packet,
    validate_schedule,
)
from .dot import export_dot

__version__ = "0.1.0"

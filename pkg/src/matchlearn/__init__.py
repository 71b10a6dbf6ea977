"""Decentralized two-sided matching with trial-and-error learning.

Simulation of the repeated proposal game, exact perturbed-chain analysis on
small markets, and resistance-graph prediction of the stochastically stable
matchings.
"""

from .agents import (
    AcceptorState,
    BadEpsilon,
    ExploitParams,
    Mood,
    ProposerState,
    atl_act,
    atl_star_update,
    atl_update,
    initial_acceptor_state,
    initial_proposer_state,
    initial_state,
    ptl_act,
    ptl_update,
)
from .chain import (
    ExactChain,
    GlobalState,
    MatchingMass,
    NotErgodic,
    StateCapExceeded,
    StationaryResult,
    matching_mass,
    reachable_chain,
    stationary_distribution,
    symbolic_reachable_chain,
)
from .engine import (
    ATL,
    ATL_STAR,
    PTL,
    EmptyWindow,
    PolicyCombo,
    RecordPolicy,
    StepRecord,
    Trajectory,
    acceptor_optimal_mass,
    content_profile,
    empirical_distribution,
    initial_states,
    run,
    stable_mass,
    step,
)
from .market import (
    UNMATCHED,
    AgentId,
    BlockingPair,
    DimensionMismatch,
    DuplicateUtility,
    Market,
    MarketError,
    Matching,
    NonzeroUnmatched,
    NotBlocking,
    NotStable,
    OutOfRange,
    Side,
    TooLarge,
    Unmatched,
    best_response_dynamics,
    blocking_pairs,
    blocking_path_to_stability,
    deferred_acceptance,
    enumerate_stable,
    is_stable,
    iter_matchings,
    market_from_json,
    market_to_json,
    near_stable,
    random_market,
    resolve_blocking_pair,
    validate_market,
)
from .randomness import ScriptedRandomness, SeededRandomness
from .resistance import (
    InTree,
    ResistanceEdge,
    ResistanceGraph,
    Unreachable,
    acceptor_brd_check,
    build_resistance_graph,
    min_in_tree,
    min_in_tree_roots,
)

__version__ = "0.1.0"

"""The repeated matching game: proposals, responses, induced matchings, updates.

Each timestep has three phases: proposers pick targets, acceptors respond to
the proposal sets they received, and the reciprocated pairs form the step's
matching, paying each agent the utility of its realized partner. Agents see
nothing beyond their own actions, utilities, and (for acceptors) proposal
sets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .agents import (
    AcceptorState,
    ExploitParams,
    Mood,
    ProposerState,
    atl_act,
    atl_star_update,
    atl_update,
    check_epsilon,
    initial_acceptor_state,
    initial_proposer_state,
    ptl_act,
    ptl_update,
)
from .market import (
    UNMATCHED,
    Market,
    Matching,
    Side,
    deferred_acceptance,
    is_stable,
    rational_to_decimal,
)
from .randomness import SeededRandomness

PTL = "PTL"
ATL = "ATL"
ATL_STAR = "ATL*"


class EmptyWindow(ValueError):
    pass


@dataclass(frozen=True)
class PolicyCombo:
    """Which update rule the acceptors run, and at what experimentation rate."""

    acceptor_policy: str = ATL
    epsilon: float = 0.01
    exploit: ExploitParams | None = None
    proposer_policy: str = PTL

    def __post_init__(self):
        if self.proposer_policy != PTL:
            raise ValueError(f"unknown proposer policy {self.proposer_policy!r}")
        if self.acceptor_policy not in (ATL, ATL_STAR):
            raise ValueError(f"unknown acceptor policy {self.acceptor_policy!r}")
        if (self.exploit is not None) != (self.acceptor_policy == ATL_STAR):
            raise ValueError("exploit params are required exactly when acceptors run ATL*")
        check_epsilon(self.epsilon)
        if self.exploit is not None:
            if self.exploit.epsilon != self.epsilon:
                raise ValueError("exploit.epsilon must match the combo epsilon")
            self.exploit.validate()

    @staticmethod
    def atl(epsilon: float = 0.01) -> "PolicyCombo":
        return PolicyCombo(ATL, epsilon, None)

    @staticmethod
    def atl_star(epsilon: float = 0.01, **exploit_kwargs) -> "PolicyCombo":
        return PolicyCombo(ATL_STAR, epsilon, ExploitParams(epsilon=epsilon, **exploit_kwargs))

    def label(self) -> str:
        return f"{self.proposer_policy}+{self.acceptor_policy}"

    def to_json_dict(self) -> dict:
        return {
            "proposer_policy": self.proposer_policy,
            "acceptor_policy": self.acceptor_policy,
            "epsilon": repr(float(self.epsilon)),
        }


@dataclass(frozen=True)
class RecordPolicy:
    kind: str = "summary"
    stride: int = 1

    @staticmethod
    def full() -> "RecordPolicy":
        return RecordPolicy("full")

    @staticmethod
    def thin(stride: int) -> "RecordPolicy":
        if stride < 1:
            raise ValueError("thinning stride must be >= 1")
        return RecordPolicy("thin", stride)

    @staticmethod
    def summary_only() -> "RecordPolicy":
        return RecordPolicy("summary")

    def keeps(self, t: int) -> bool:
        if self.kind == "full":
            return True
        if self.kind == "thin":
            return t % self.stride == 0
        return False


@dataclass(frozen=True)
class StepRecord:
    t: int
    proposer_actions: tuple[int, ...]
    proposal_sets: tuple[tuple[int, ...], ...]
    acceptor_actions: tuple[int, ...]
    matching: Matching
    proposer_utilities: tuple[Fraction, ...]
    acceptor_utilities: tuple[Fraction, ...]
    states_after: tuple[tuple[ProposerState, ...], tuple[AcceptorState, ...]]


@dataclass
class Trajectory:
    market_fingerprint: str
    combo: PolicyCombo
    seed: int
    horizon: int
    matching_codes: np.ndarray
    matchings: list[Matching]
    records: list[StepRecord] = field(default_factory=list)

    def counts(self, start: int = 0) -> dict[Matching, int]:
        window = self.matching_codes[start:]
        tallies = np.bincount(window, minlength=len(self.matchings))
        return {
            self.matchings[code]: int(count)
            for code, count in enumerate(tallies)
            if count
        }


def _float_tables(market: Market):
    """Per-agent float utility rows, or None when floats would collide."""
    pu = [[float(u) for u in row] for row in market.proposer_utils]
    au = [[float(u) for u in row] for row in market.acceptor_utils]
    for rows, width in ((pu, market.m), (au, market.n)):
        for row in rows:
            if len(set(row)) != width or 0.0 in row:
                return None
    return pu, au


def _tables_for(market: Market, exact: bool):
    if not exact:
        floats = _float_tables(market)
        if floats is not None:
            return floats
    return market.proposer_utils, market.acceptor_utils


def _advance(n, m, pu, au, states_p, states_a, combo, t, source):
    """One full three-phase step; returns actions, proposals, and new states."""
    epsilon = combo.epsilon
    proposer_actions = [
        ptl_act(states_p[i], epsilon, m, source.proposer_stream(i, t)) for i in range(n)
    ]

    proposals: list[list[int]] = [[] for _ in range(m)]
    for i, target in enumerate(proposer_actions):
        if target != UNMATCHED:
            proposals[target].append(i)

    acceptor_actions = [
        atl_act(states_a[j], proposals[j], source.acceptor_stream(j, t)) for j in range(m)
    ]

    proposer_partner = [UNMATCHED] * n
    for j, chosen in enumerate(acceptor_actions):
        if chosen != UNMATCHED:
            proposer_partner[chosen] = j

    new_p = []
    for i in range(n):
        j = proposer_partner[i]
        utility = pu[i][j] if j != UNMATCHED else 0
        new_p.append(ptl_update(states_p[i], proposer_actions[i], utility))

    new_a = []
    if combo.acceptor_policy == ATL:
        for j in range(m):
            chosen = acceptor_actions[j]
            utility = au[j][chosen] if chosen != UNMATCHED else 0
            new_a.append(atl_update(states_a[j], chosen, utility, proposals[j]))
    else:
        params = combo.exploit
        for j in range(m):
            chosen = acceptor_actions[j]
            utility = au[j][chosen] if chosen != UNMATCHED else 0
            new_a.append(
                atl_star_update(
                    states_a[j],
                    chosen,
                    utility,
                    proposals[j],
                    params,
                    source.acceptor_update_stream(j, t),
                )
            )

    return proposer_actions, proposals, acceptor_actions, proposer_partner, new_p, new_a


def initial_states(market: Market):
    return (
        tuple(initial_proposer_state() for _ in range(market.n)),
        tuple(initial_acceptor_state() for _ in range(market.m)),
    )


def content_profile(market: Market, mu: Matching):
    """Steady agent states whose baselines reproduce `mu` forever at rate 0.

    Matched agents are content with their partner (the acceptor's remembered
    proposal set is exactly its partner); unmatched agents are discontent.
    """
    market.check_matching(mu)
    proposers = []
    for i, j in enumerate(mu.proposer_partner):
        if j == UNMATCHED:
            proposers.append(initial_proposer_state())
        else:
            proposers.append(
                ProposerState(Mood.CONTENT, j, market.proposer_utils[i][j], UNMATCHED, Fraction(0))
            )
    acceptors = []
    for j, i in enumerate(mu.acceptor_partner()):
        if i == UNMATCHED:
            acceptors.append(initial_acceptor_state())
        else:
            acceptors.append(
                AcceptorState(
                    Mood.CONTENT,
                    i,
                    market.acceptor_utils[j][i],
                    frozenset((i,)),
                    UNMATCHED,
                    Fraction(0),
                )
            )
    return tuple(proposers), tuple(acceptors)


def step(market: Market, states, combo: PolicyCombo, t: int = 1, randomness=None):
    """One exact (Fraction-utility) step; returns (StepRecord, new states)."""
    states_p, states_a = states
    if len(states_p) != market.n or len(states_a) != market.m:
        raise ValueError("state profile does not match market dimensions")
    source = randomness if randomness is not None else SeededRandomness(0, market.n, market.m)
    pu, au = market.proposer_utils, market.acceptor_utils
    pa, props, aa, partner, new_p, new_a = _advance(
        market.n, market.m, pu, au, states_p, states_a, combo, t, source
    )
    record = _build_record(market, t, pa, props, aa, partner, new_p, new_a)
    return record, (tuple(new_p), tuple(new_a))


def _build_record(market, t, pa, props, aa, partner, new_p, new_a) -> StepRecord:
    mu = Matching(tuple(partner), market.m)
    acceptor_side = mu.acceptor_partner()
    return StepRecord(
        t=t,
        proposer_actions=tuple(pa),
        proposal_sets=tuple(tuple(p) for p in props),
        acceptor_actions=tuple(aa),
        matching=mu,
        proposer_utilities=tuple(
            market.proposer_utility(i, partner[i]) for i in range(market.n)
        ),
        acceptor_utilities=tuple(
            market.acceptor_utility(j, acceptor_side[j]) for j in range(market.m)
        ),
        states_after=(tuple(new_p), tuple(new_a)),
    )


def run(
    market: Market,
    combo: PolicyCombo,
    horizon: int,
    seed: int,
    record_policy: RecordPolicy = RecordPolicy.summary_only(),
    randomness=None,
    initial=None,
) -> Trajectory:
    """Simulate `horizon` steps from the all-discontent start (deterministic per seed)."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    n, m = market.n, market.m
    source = randomness if randomness is not None else SeededRandomness(seed, n, m)
    pu, au = _tables_for(market, exact=False)
    states_p, states_a = initial if initial is not None else initial_states(market)
    states_p, states_a = list(states_p), list(states_a)

    codes = np.empty(horizon, dtype=np.int32)
    code_of: dict[tuple[int, ...], int] = {}
    matchings: list[Matching] = []
    records: list[StepRecord] = []

    for t in range(1, horizon + 1):
        pa, props, aa, partner, states_p, states_a = _advance(
            n, m, pu, au, states_p, states_a, combo, t, source
        )
        key = tuple(partner)
        code = code_of.get(key)
        if code is None:
            code = len(matchings)
            code_of[key] = code
            matchings.append(Matching(key, m))
        codes[t - 1] = code
        if record_policy.keeps(t):
            records.append(_build_record(market, t, pa, props, aa, partner, states_p, states_a))

    return Trajectory(
        market_fingerprint=market.fingerprint(),
        combo=combo,
        seed=seed,
        horizon=horizon,
        matching_codes=codes,
        matchings=matchings,
        records=records,
    )


def empirical_distribution(trajectory: Trajectory, burn_in_fraction: float) -> dict[Matching, float]:
    """Normalized matching frequencies over the post-burn-in window."""
    if not 0 <= burn_in_fraction < 1:
        raise ValueError("burn_in_fraction must lie in [0, 1)")
    start = int(trajectory.horizon * burn_in_fraction)
    window = trajectory.matching_codes[start:]
    if window.size == 0:
        raise EmptyWindow("no steps after burn-in")
    tallies = np.bincount(window, minlength=len(trajectory.matchings))
    total = window.size
    return {
        trajectory.matchings[code]: count / total
        for code, count in enumerate(tallies)
        if count
    }


def stable_mass(trajectory: Trajectory, market: Market, burn_in_fraction: float) -> float:
    """Post-burn-in fraction of steps whose realized matching was stable."""
    distribution = empirical_distribution(trajectory, burn_in_fraction)
    return sum(freq for mu, freq in distribution.items() if is_stable(market, mu))


def acceptor_optimal_mass(
    trajectory: Trajectory, market: Market, burn_in_fraction: float
) -> float:
    """Post-burn-in fraction of steps realizing the acceptor-optimal stable matching."""
    target = deferred_acceptance(market, Side.ACCEPTOR)
    distribution = empirical_distribution(trajectory, burn_in_fraction)
    return distribution.get(target, 0.0)


# --- serialization -----------------------------------------------------------


def _utility_string(value) -> str:
    if isinstance(value, Fraction):
        try:
            return rational_to_decimal(value)
        except ValueError:
            return repr(float(value))
    return repr(float(value))


def proposer_state_to_json(state: ProposerState) -> dict:
    return {
        "mood": state.mood.value,
        "baseline_action": state.baseline_action,
        "baseline_utility": _utility_string(state.baseline_utility),
        "trial_action": state.trial_action,
        "trial_utility": _utility_string(state.trial_utility),
    }


def acceptor_state_to_json(state: AcceptorState) -> dict:
    return {
        "mood": state.mood.value,
        "baseline_action": state.baseline_action,
        "baseline_utility": _utility_string(state.baseline_utility),
        "baseline_proposals": sorted(state.baseline_proposals),
        "trial_action": state.trial_action,
        "trial_utility": _utility_string(state.trial_utility),
    }


def record_to_json_dict(record: StepRecord) -> dict:
    states_p, states_a = record.states_after
    return {
        "t": record.t,
        "proposer_actions": list(record.proposer_actions),
        "proposal_sets": [list(s) for s in record.proposal_sets],
        "acceptor_actions": list(record.acceptor_actions),
        "matching": record.matching.to_list(),
        "proposer_utilities": [_utility_string(u) for u in record.proposer_utilities],
        "acceptor_utilities": [_utility_string(u) for u in record.acceptor_utilities],
        "states_after": {
            "proposers": [proposer_state_to_json(s) for s in states_p],
            "acceptors": [acceptor_state_to_json(s) for s in states_a],
        },
    }


def trajectory_jsonl_lines(trajectory: Trajectory):
    """Header line, then one JSON line per retained step record."""
    header = {
        "schema": "matchlearn-trajectory-1",
        "market_fingerprint": trajectory.market_fingerprint,
        "combo": trajectory.combo.to_json_dict(),
        "seed": trajectory.seed,
        "horizon": trajectory.horizon,
    }
    yield json.dumps(header, sort_keys=True)
    for record in trajectory.records:
        yield json.dumps(record_to_json_dict(record), sort_keys=True)


def summary_csv_lines(trajectory: Trajectory, market: Market, burn_in_fraction: float = 0.0):
    """Matching-frequency table: matching, count, frequency, stable?, acceptor-optimal?."""
    start = int(trajectory.horizon * burn_in_fraction)
    counts = trajectory.counts(start)
    total = sum(counts.values())
    target = deferred_acceptance(market, Side.ACCEPTOR)
    yield "matching,count,frequency,stable,acceptor_optimal"
    ordered = sorted(counts.items(), key=lambda item: -item[1])
    for mu, count in ordered:
        matching_text = " ".join(str(v) for v in mu.to_list())
        yield (
            f"{matching_text},{count},{count / total:.12f},"
            f"{int(is_stable(market, mu))},{int(mu == target)}"
        )

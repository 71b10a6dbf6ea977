"""The three learning policies as explicit finite-state machines.

Proposers and acceptors each carry a small state (mood, baseline action and
utility, trial action and utility; acceptors also remember the proposal set
they last saw). Action selection and state updates are pure functions, so
the same code drives both the sampling simulator and the exact chain
enumeration. Utilities are only ever compared, never combined, so states
work identically with Fraction or float utilities.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, NamedTuple, Sequence

from .market import UNMATCHED, Side
from .perturb import EPS_ONE, EpsPoly


class Mood(Enum):
    CONTENT = "C"
    HOPEFUL = "H"
    WATCHFUL = "W"
    DISCONTENT = "D"


class BadEpsilon(ValueError):
    pass


class ProposerState(NamedTuple):
    mood: Mood
    baseline_action: int
    baseline_utility: object
    trial_action: int
    trial_utility: object


class AcceptorState(NamedTuple):
    mood: Mood
    baseline_action: int
    baseline_utility: object
    baseline_proposals: frozenset
    trial_action: int
    trial_utility: object


NO_PROPOSALS: frozenset = frozenset()
ZERO = Fraction(0)


def initial_proposer_state() -> ProposerState:
    return ProposerState(Mood.DISCONTENT, UNMATCHED, ZERO, UNMATCHED, ZERO)


def initial_acceptor_state() -> AcceptorState:
    return AcceptorState(Mood.DISCONTENT, UNMATCHED, ZERO, NO_PROPOSALS, UNMATCHED, ZERO)


def initial_state(side: Side):
    if side is Side.PROPOSER:
        return initial_proposer_state()
    return initial_acceptor_state()


def check_epsilon(epsilon) -> None:
    if not (0 < epsilon and epsilon + epsilon * epsilon <= 1):
        raise BadEpsilon(f"need 0 < eps and eps + eps^2 <= 1, got {epsilon}")


def ptl_act(state: ProposerState, epsilon, num_acceptors: int, rng) -> int:
    """Proposer action selection.

    Hopeful repeats the trial, watchful repeats the baseline; content and
    discontent mix: unmatched w.p. eps^2, a uniform acceptor w.p. eps, and
    the baseline otherwise.
    """
    mood = state.mood
    if mood is Mood.HOPEFUL:
        return state.trial_action
    if mood is Mood.WATCHFUL:
        return state.baseline_action
    check_epsilon(epsilon)
    e2 = epsilon * epsilon
    draw = rng.random()
    if draw < e2:
        return UNMATCHED
    if draw < e2 + epsilon:
        k = int(rng.random() * num_acceptors)
        return k if k < num_acceptors else num_acceptors - 1
    return state.baseline_action


def ptl_update(state: ProposerState, action: int, utility) -> ProposerState:
    """Proposer state update given the action just played and utility received."""
    mood = state.mood
    if mood is Mood.CONTENT:
        if action == state.baseline_action:
            if utility < state.baseline_utility:
                return ProposerState(
                    Mood.WATCHFUL, state.baseline_action, state.baseline_utility, UNMATCHED, ZERO
                )
            if utility == state.baseline_utility:
                return ProposerState(
                    Mood.CONTENT, state.baseline_action, state.baseline_utility, UNMATCHED, ZERO
                )
            return ProposerState(
                Mood.HOPEFUL, state.baseline_action, state.baseline_utility, action, utility
            )
        if utility <= state.baseline_utility:
            return ProposerState(
                Mood.CONTENT, state.baseline_action, state.baseline_utility, UNMATCHED, ZERO
            )
        return ProposerState(
            Mood.HOPEFUL, state.baseline_action, state.baseline_utility, action, utility
        )
    if mood is Mood.HOPEFUL:
        if utility == state.trial_utility:
            return ProposerState(
                Mood.CONTENT, state.trial_action, state.trial_utility, UNMATCHED, ZERO
            )
        if state.baseline_utility > 0:
            return ProposerState(
                Mood.CONTENT, state.baseline_action, state.baseline_utility, UNMATCHED, ZERO
            )
        return ProposerState(Mood.DISCONTENT, UNMATCHED, ZERO, UNMATCHED, ZERO)
    if mood is Mood.WATCHFUL:
        if utility < state.baseline_utility:
            return ProposerState(Mood.DISCONTENT, UNMATCHED, ZERO, UNMATCHED, ZERO)
        return ProposerState(
            Mood.CONTENT, state.baseline_action, state.baseline_utility, UNMATCHED, ZERO
        )
    # discontent
    if utility > state.baseline_utility:
        return ProposerState(
            Mood.HOPEFUL, state.baseline_action, state.baseline_utility, action, utility
        )
    return ProposerState(Mood.DISCONTENT, UNMATCHED, ZERO, UNMATCHED, ZERO)


def atl_act(state: AcceptorState, proposals: Sequence[int], rng) -> int:
    """Acceptor action selection over the received proposal set.

    Content and discontent acceptors try an unfamiliar proposer whenever one
    shows up (uniformly among the new ones); otherwise content falls back to
    the baseline when present, and everyone else rejects. Hopeful prefers
    trial, then baseline; watchful only accepts the baseline.
    """
    mood = state.mood
    if mood is Mood.CONTENT or mood is Mood.DISCONTENT:
        known = state.baseline_proposals
        fresh = [p for p in proposals if p not in known]
        if fresh:
            if len(fresh) == 1:
                return fresh[0]
            k = int(rng.random() * len(fresh))
            return fresh[k] if k < len(fresh) else fresh[-1]
        if mood is Mood.CONTENT and state.baseline_action in proposals:
            return state.baseline_action
        return UNMATCHED
    if mood is Mood.HOPEFUL:
        if state.trial_action in proposals:
            return state.trial_action
        if state.baseline_action in proposals:
            return state.baseline_action
        return UNMATCHED
    # watchful
    if state.baseline_action in proposals:
        return state.baseline_action
    return UNMATCHED


def atl_update(
    state: AcceptorState, action: int, utility, proposals: Sequence[int]
) -> AcceptorState:
    """Acceptor state update; the observed proposal set becomes the new baseline set."""
    observed = frozenset(proposals)
    mood = state.mood
    if mood is Mood.CONTENT:
        if utility < state.baseline_utility:
            return AcceptorState(
                Mood.WATCHFUL, state.baseline_action, state.baseline_utility, observed, UNMATCHED, ZERO
            )
        if utility == state.baseline_utility:
            return AcceptorState(
                Mood.CONTENT, state.baseline_action, state.baseline_utility, observed, UNMATCHED, ZERO
            )
        return AcceptorState(
            Mood.HOPEFUL, state.baseline_action, state.baseline_utility, observed, action, utility
        )
    if mood is Mood.HOPEFUL:
        if utility == state.trial_utility:
            return AcceptorState(
                Mood.CONTENT, state.trial_action, state.trial_utility, observed, UNMATCHED, ZERO
            )
        if state.baseline_utility > 0:
            return AcceptorState(
                Mood.CONTENT, state.baseline_action, state.baseline_utility, observed, UNMATCHED, ZERO
            )
        return AcceptorState(
            Mood.DISCONTENT, state.baseline_action, state.baseline_utility, observed, UNMATCHED, ZERO
        )
    if mood is Mood.WATCHFUL:
        if utility < state.baseline_utility:
            # full reset: the remembered proposal set is cleared, not refreshed
            return AcceptorState(Mood.DISCONTENT, UNMATCHED, ZERO, NO_PROPOSALS, UNMATCHED, ZERO)
        return AcceptorState(
            Mood.CONTENT, state.baseline_action, state.baseline_utility, observed, UNMATCHED, ZERO
        )
    # discontent
    if utility > state.baseline_utility:
        return AcceptorState(Mood.HOPEFUL, UNMATCHED, ZERO, observed, action, utility)
    return AcceptorState(Mood.DISCONTENT, UNMATCHED, ZERO, observed, UNMATCHED, ZERO)


def default_content_exponent(utility):
    """Strictly decreasing map of [0,1) into (0, 1/2); exact on rationals."""
    return Fraction(9, 20) - Fraction(1, 5) * utility


def default_discontent_exponent(utility):
    """Strictly decreasing map of [0,1) into (1/2, 1); exact on rationals."""
    return Fraction(3, 4) - Fraction(1, 5) * utility


@dataclass(frozen=True)
class ExploitParams:
    """Acceptance-probability curves for the acceptor-optimal update rule.

    A content acceptor offered a utility gain u turns hopeful with probability
    eps**content_exponent(u); a discontent one with eps**discontent_exponent(u).
    Both curves must be strictly decreasing, with the content curve valued in
    (0, 0.5) and the discontent curve in (0.5, 1), so seizing a gain while
    unmatched is always the rarer event.
    """

    content_exponent: Callable = default_content_exponent
    discontent_exponent: Callable = default_discontent_exponent
    epsilon: float = 0.01

    def validate(self, grid: int = 64) -> None:
        if not 0 < self.epsilon <= 1:
            raise BadEpsilon(f"exploit epsilon {self.epsilon} outside (0, 1]")
        points = [Fraction(k, grid) for k in range(grid)]
        for curve, lo, hi, name in (
            (self.content_exponent, 0, Fraction(1, 2), "content_exponent"),
            (self.discontent_exponent, Fraction(1, 2), 1, "discontent_exponent"),
        ):
            values = [curve(u) for u in points]
            if any(not (lo < v < hi) for v in values):
                raise ValueError(f"{name} leaves its required range ({lo}, {hi})")
            if any(a <= b for a, b in zip(values, values[1:])):
                raise ValueError(f"{name} is not strictly decreasing")


def atl_star_update(
    state: AcceptorState,
    action: int,
    utility,
    proposals: Sequence[int],
    params: ExploitParams,
    rng,
) -> AcceptorState:
    """Acceptor-optimal state update: gains are seized only probabilistically.

    Identical to atl_update except that a content (discontent) acceptor who
    just received a utility gain becomes hopeful only with probability
    eps**content_exponent(gain) (eps**discontent_exponent(gain)), and
    otherwise keeps its baseline with the proposal set refreshed.
    """
    mood = state.mood
    if mood is Mood.CONTENT and utility > state.baseline_utility:
        threshold = params.epsilon ** params.content_exponent(utility)
        if rng.random() < threshold:
            return atl_update(state, action, utility, proposals)
        return AcceptorState(
            Mood.CONTENT,
            state.baseline_action,
            state.baseline_utility,
            frozenset(proposals),
            UNMATCHED,
            ZERO,
        )
    if mood is Mood.DISCONTENT and utility > state.baseline_utility:
        threshold = params.epsilon ** params.discontent_exponent(utility)
        if rng.random() < threshold:
            return atl_update(state, action, utility, proposals)
        return AcceptorState(
            Mood.DISCONTENT, UNMATCHED, ZERO, frozenset(proposals), UNMATCHED, ZERO
        )
    return atl_update(state, action, utility, proposals)


# --- branch enumerators -----------------------------------------------------
#
# The exact-chain construction needs every positive-probability outcome with
# its probability as a function of the experimentation rate. These enumerate
# the same case analysis as the samplers above; the test suite checks the two
# against each other case by case.


def ptl_act_branches(
    state: ProposerState, num_acceptors: int
) -> list[tuple[EpsPoly, int]]:
    """Action distribution of a proposer as (probability, action) branches."""
    mood = state.mood
    if mood is Mood.HOPEFUL:
        return [(EPS_ONE, state.trial_action)]
    if mood is Mood.WATCHFUL:
        return [(EPS_ONE, state.baseline_action)]
    branches: dict[int, EpsPoly] = {UNMATCHED: EpsPoly.power(2)}
    share = Fraction(1, num_acceptors)
    for j in range(num_acceptors):
        piece = EpsPoly.power(1, share)
        branches[j] = branches[j] + piece if j in branches else piece
    base = state.baseline_action
    mixture = EpsPoly.baseline_mixture()
    branches[base] = branches[base] + mixture if base in branches else mixture
    return [(poly, action) for action, poly in sorted(branches.items())]


def atl_act_branches(
    state: AcceptorState, proposals: Sequence[int]
) -> list[tuple[Fraction, int]]:
    """Action distribution of an acceptor as (probability, action) branches."""
    mood = state.mood
    if mood is Mood.CONTENT or mood is Mood.DISCONTENT:
        fresh = sorted(set(proposals) - state.baseline_proposals)
        if fresh:
            share = Fraction(1, len(fresh))
            return [(share, p) for p in fresh]
        if mood is Mood.CONTENT and state.baseline_action in proposals:
            return [(Fraction(1), state.baseline_action)]
        return [(Fraction(1), UNMATCHED)]
    if mood is Mood.HOPEFUL:
        if state.trial_action in proposals:
            return [(Fraction(1), state.trial_action)]
        if state.baseline_action in proposals:
            return [(Fraction(1), state.baseline_action)]
        return [(Fraction(1), UNMATCHED)]
    if state.baseline_action in proposals:
        return [(Fraction(1), state.baseline_action)]
    return [(Fraction(1), UNMATCHED)]


def atl_update_branches(
    state: AcceptorState, action: int, utility, proposals: Sequence[int]
) -> list[tuple[EpsPoly, AcceptorState]]:
    return [(EPS_ONE, atl_update(state, action, utility, proposals))]


def atl_star_update_branches(
    state: AcceptorState,
    action: int,
    utility,
    proposals: Sequence[int],
    params: ExploitParams,
) -> list[tuple[EpsPoly, AcceptorState]]:
    """Outcome distribution of the acceptor-optimal update rule."""
    mood = state.mood
    if mood is Mood.CONTENT and utility > state.baseline_utility:
        exponent = params.content_exponent(utility)
        stay = AcceptorState(
            Mood.CONTENT,
            state.baseline_action,
            state.baseline_utility,
            frozenset(proposals),
            UNMATCHED,
            ZERO,
        )
        seize = atl_update(state, action, utility, proposals)
        return [(EpsPoly.one_minus_power(exponent), stay), (EpsPoly.power(exponent), seize)]
    if mood is Mood.DISCONTENT and utility > state.baseline_utility:
        exponent = params.discontent_exponent(utility)
        stay = AcceptorState(
            Mood.DISCONTENT, UNMATCHED, ZERO, frozenset(proposals), UNMATCHED, ZERO
        )
        seize = atl_update(state, action, utility, proposals)
        return [(EpsPoly.one_minus_power(exponent), stay), (EpsPoly.power(exponent), seize)]
    return [(EPS_ONE, atl_update(state, action, utility, proposals))]

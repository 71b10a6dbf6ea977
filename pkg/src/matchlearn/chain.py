"""Exact analysis of the perturbed joint-state Markov chain on small markets.

The chain over all agents' states is built once with transition probabilities
kept symbolic in the experimentation rate, then instantiated at any numeric
rate. Integer-exponent chains (plain acceptor updates) instantiate to exact
rationals; the acceptor-optimal rule introduces fractional exponents and
falls back to floats with a residual bound.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .agents import (
    AcceptorState,
    Mood,
    ProposerState,
    atl_act_branches,
    atl_star_update_branches,
    atl_update,
    ptl_act_branches,
    ptl_update,
)
from .engine import ATL, PolicyCombo, initial_states
from .market import UNMATCHED, Market, Matching, Side, deferred_acceptance, is_stable
from .perturb import EpsPoly

STATE_CAP_DEFAULT = 200_000
EXACT_SOLVE_CAP_DEFAULT = 150  # rational Gaussian elimination above this is impractical
RESIDUAL_BOUND = 1e-12


class StateCapExceeded(RuntimeError):
    pass


class NotErgodic(RuntimeError):
    pass


class GlobalState(NamedTuple):
    proposers: tuple[ProposerState, ...]
    acceptors: tuple[AcceptorState, ...]


@dataclass
class SymbolicChain:
    """Reachable joint states with rate-symbolic transition probabilities."""

    market: Market
    combo: PolicyCombo
    states: list[GlobalState]
    rows: list[dict[int, EpsPoly]]

    def instantiate(self, epsilon) -> "ExactChain":
        rows = []
        for row in self.rows:
            entries = []
            total = Fraction(0)
            for dst, poly in row.items():
                prob = poly.evaluate(epsilon)
                if prob <= 0:
                    raise ValueError(f"non-positive transition probability at rate {epsilon}")
                entries.append((dst, prob))
                total = total + prob
            if isinstance(total, Fraction):
                if total != 1:
                    raise AssertionError(f"row sums to {total}, not 1")
            elif abs(total - 1) > 1e-12:
                raise AssertionError(f"row sums to {total}, not 1")
            entries.sort()
            rows.append(entries)
        return ExactChain(self.market, self.combo, epsilon, self.states, rows)

    def resistances(self) -> dict[tuple[int, int], Fraction]:
        """Leading rate-exponent of every transition (its resistance)."""
        return {
            (i, dst): poly.resistance()
            for i, row in enumerate(self.rows)
            for dst, poly in row.items()
        }


@dataclass
class ExactChain:
    """The chain at a fixed experimentation rate; rows of (dst, probability)."""

    market: Market
    combo: PolicyCombo
    epsilon: object
    states: list[GlobalState]
    rows: list[list[tuple[int, object]]]

    def num_states(self) -> int:
        return len(self.states)

    def to_json_dict(self) -> dict:
        from .engine import acceptor_state_to_json, proposer_state_to_json

        return {
            "epsilon": repr(float(self.epsilon)),
            "states": [
                {
                    "proposers": [proposer_state_to_json(s) for s in g.proposers],
                    "acceptors": [acceptor_state_to_json(s) for s in g.acceptors],
                }
                for g in self.states
            ],
            "transitions": [
                [i, dst, repr(float(prob))]
                for i, row in enumerate(self.rows)
                for dst, prob in row
            ],
        }


def _acceptor_update_branches(combo: PolicyCombo, state, action, utility, proposals):
    if combo.acceptor_policy == ATL:
        return [(None, atl_update(state, action, utility, proposals))]
    return atl_star_update_branches(state, action, utility, proposals, combo.exploit)


def _outcomes(market: Market, combo: PolicyCombo, gstate: GlobalState):
    """Every positive-probability one-step outcome of a joint state.

    Yields (probability polynomial, successor GlobalState, matching key).
    """
    n, m = market.n, market.m
    pu, au = market.proposer_utils, market.acceptor_utils
    proposer_menus = [ptl_act_branches(s, m) for s in gstate.proposers]
    for proposer_pick in itertools.product(*proposer_menus):
        act_poly = proposer_pick[0][0]
        for poly, _ in proposer_pick[1:]:
            act_poly = act_poly * poly
        proposer_actions = [action for _, action in proposer_pick]

        proposals: list[tuple[int, ...]] = [()] * m
        for i, target in enumerate(proposer_actions):
            if target != UNMATCHED:
                proposals[target] = proposals[target] + (i,)

        acceptor_menus = [
            atl_act_branches(gstate.acceptors[j], proposals[j]) for j in range(m)
        ]
        for acceptor_pick in itertools.product(*acceptor_menus):
            choice_const = Fraction(1)
            for const, _ in acceptor_pick:
                choice_const *= const
            acceptor_actions = [action for _, action in acceptor_pick]

            partner = [UNMATCHED] * n
            for j, chosen in enumerate(acceptor_actions):
                if chosen != UNMATCHED:
                    partner[chosen] = j

            new_proposers = tuple(
                ptl_update(
                    gstate.proposers[i],
                    proposer_actions[i],
                    pu[i][partner[i]] if partner[i] != UNMATCHED else Fraction(0),
                )
                for i in range(n)
            )

            update_menus = [
                _acceptor_update_branches(
                    combo,
                    gstate.acceptors[j],
                    acceptor_actions[j],
                    au[j][acceptor_actions[j]]
                    if acceptor_actions[j] != UNMATCHED
                    else Fraction(0),
                    proposals[j],
                )
                for j in range(m)
            ]
            base_poly = act_poly.scale(choice_const)
            for update_pick in itertools.product(*update_menus):
                poly = base_poly
                for upoly, _ in update_pick:
                    if upoly is not None:
                        poly = poly * upoly
                new_acceptors = tuple(s for _, s in update_pick)
                yield poly, GlobalState(new_proposers, new_acceptors), tuple(partner)


def symbolic_reachable_chain(
    market: Market, combo: PolicyCombo, state_cap: int = STATE_CAP_DEFAULT
) -> SymbolicChain:
    """Breadth-first closure from the all-discontent start state."""
    joint_actions = (market.m + 1) ** market.n * (market.n + 1) ** market.m
    if joint_actions > 1_000_000:
        raise StateCapExceeded(
            f"joint action space has {joint_actions} profiles per state; "
            f"exact chain analysis is limited to smaller markets"
        )
    start = GlobalState(*initial_states(market))
    states = [start]
    index = {start: 0}
    rows: list[dict[int, EpsPoly]] = []
    frontier = 0
    while frontier < len(states):
        gstate = states[frontier]
        row: dict[int, EpsPoly] = {}
        for poly, successor, _ in _outcomes(market, combo, gstate):
            dst = index.get(successor)
            if dst is None:
                dst = len(states)
                if dst >= state_cap:
                    raise StateCapExceeded(
                        f"reachable state space exceeds cap {state_cap}"
                    )
                index[successor] = dst
                states.append(successor)
            if dst in row:
                row[dst] = row[dst] + poly
            else:
                row[dst] = poly
        rows.append(row)
        frontier += 1
    return SymbolicChain(market, combo, states, rows)


def reachable_chain(
    market: Market, combo: PolicyCombo, state_cap: int = STATE_CAP_DEFAULT
) -> ExactChain:
    return symbolic_reachable_chain(market, combo, state_cap).instantiate(combo.epsilon)


# --- stationary distribution -------------------------------------------------


def _strongly_connected_components(adjacency: list[list[int]]) -> list[list[int]]:
    """Iterative Kosaraju; components in reverse topological order."""
    n = len(adjacency)
    visited = [False] * n
    order: list[int] = []
    for root in range(n):
        if visited[root]:
            continue
        stack = [(root, 0)]
        visited[root] = True
        while stack:
            node, ptr = stack[-1]
            if ptr < len(adjacency[node]):
                stack[-1] = (node, ptr + 1)
                nxt = adjacency[node][ptr]
                if not visited[nxt]:
                    visited[nxt] = True
                    stack.append((nxt, 0))
            else:
                order.append(node)
                stack.pop()
    reverse: list[list[int]] = [[] for _ in range(n)]
    for src, targets in enumerate(adjacency):
        for dst in targets:
            reverse[dst].append(src)
    component = [-1] * n
    components: list[list[int]] = []
    for root in reversed(order):
        if component[root] != -1:
            continue
        members = [root]
        component[root] = len(components)
        stack = [root]
        while stack:
            node = stack.pop()
            for nxt in reverse[node]:
                if component[nxt] == -1:
                    component[nxt] = len(components)
                    members.append(nxt)
                    stack.append(nxt)
        components.append(members)
    return components


def _closed_classes(chain: ExactChain) -> list[list[int]]:
    adjacency = [[dst for dst, _ in row] for row in chain.rows]
    components = _strongly_connected_components(adjacency)
    labels = [-1] * len(adjacency)
    for k, members in enumerate(components):
        for node in members:
            labels[node] = k
    closed = []
    for k, members in enumerate(components):
        if all(labels[dst] == k for node in members for dst in adjacency[node]):
            closed.append(members)
    return closed


def _solve_exact(size: int, entries: dict[tuple[int, int], Fraction]) -> list[Fraction]:
    """Exact stationary vector of an irreducible stochastic matrix (rows sum to 1)."""
    # pi (P - I) = 0 with sum(pi) = 1, transposed into A x = b
    a = [[Fraction(0)] * size for _ in range(size)]
    for (i, j), p in entries.items():
        a[j][i] += p
    for i in range(size):
        a[i][i] -= 1
    a[size - 1] = [Fraction(1)] * size
    b = [Fraction(0)] * size
    b[size - 1] = Fraction(1)

    for col in range(size):
        pivot = next((r for r in range(col, size) if a[r][col] != 0), None)
        if pivot is None:
            raise NotErgodic("singular stationary system; chain is not irreducible")
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            b[col], b[pivot] = b[pivot], b[col]
        inv = 1 / a[col][col]
        a[col] = [v * inv for v in a[col]]
        b[col] *= inv
        for r in range(size):
            if r != col and a[r][col] != 0:
                factor = a[r][col]
                a[r] = [v - factor * w for v, w in zip(a[r], a[col])]
                b[r] -= factor * b[col]
    return b


def _solve_float(size: int, entries: dict[tuple[int, int], float]) -> np.ndarray:
    import scipy.sparse
    import scipy.sparse.linalg

    if size == 1:
        return np.array([1.0])
    data, rows, cols = [], [], []
    for (i, j), p in entries.items():
        rows.append(j)
        cols.append(i)
        data.append(float(p))
    matrix = scipy.sparse.coo_matrix((data, (rows, cols)), shape=(size, size)).tolil()
    for i in range(size):
        matrix[i, i] -= 1.0
    matrix[size - 1, :] = 1.0
    b = np.zeros(size)
    b[size - 1] = 1.0
    solution = scipy.sparse.linalg.spsolve(matrix.tocsr(), b)
    solution = np.clip(solution, 0.0, None)
    return solution / solution.sum()


@dataclass
class StationaryResult:
    probabilities: list  # Fraction (exact path) or float, aligned with chain.states
    residual: float
    exact: bool

    def as_mapping(self, chain: ExactChain) -> dict:
        return {
            chain.states[i]: p for i, p in enumerate(self.probabilities) if p > 0
        }


def stationary_distribution(
    chain: ExactChain,
    exact_cutoff: int = EXACT_SOLVE_CAP_DEFAULT,
    residual_bound: float = RESIDUAL_BOUND,
) -> StationaryResult:
    """The unique stationary distribution of the chain.

    The chain must have exactly one closed communicating class (states made
    transient by the discontent start are fine and receive probability 0);
    anything else raises NotErgodic.
    """
    closed = _closed_classes(chain)
    if len(closed) != 1:
        raise NotErgodic(f"found {len(closed)} closed classes, expected 1")
    members = sorted(closed[0])
    local = {node: k for k, node in enumerate(members)}
    size = len(members)

    entries: dict[tuple[int, int], object] = {}
    all_exact = isinstance(chain.epsilon, (int, Fraction))
    for node in members:
        for dst, prob in chain.rows[node]:
            entries[(local[node], local[dst])] = prob
            if not isinstance(prob, (int, Fraction)):
                all_exact = False

    use_exact = all_exact and size <= exact_cutoff
    if use_exact:
        local_pi = _solve_exact(size, entries)
    else:
        local_pi = list(_solve_float(size, entries))

    zero = Fraction(0) if use_exact else 0.0
    pi = [zero] * len(chain.states)
    for node, k in local.items():
        pi[node] = local_pi[k]

    residual = _residual(chain, pi)
    if not use_exact and residual > residual_bound:
        raise AssertionError(f"stationary residual {residual} exceeds {residual_bound}")
    return StationaryResult(pi, residual, use_exact)


def _residual(chain: ExactChain, pi) -> float:
    flow = [0.0] * len(pi)
    pif = [float(p) for p in pi]
    for i, row in enumerate(chain.rows):
        weight = pif[i]
        if weight == 0.0:
            continue
        for dst, prob in row:
            flow[dst] += weight * float(prob)
    return max(abs(f - p) for f, p in zip(flow, pif))


# --- projection onto matchings ----------------------------------------------


@dataclass
class MatchingMass:
    per_matching: dict[Matching, object]
    stable_mass: object
    acceptor_optimal_mass: object


def _zero_rate_matchings(market: Market, gstate: GlobalState):
    """Matching distribution of one unperturbed step (ties split uniformly)."""
    n, m = market.n, market.m
    actions = []
    for state in gstate.proposers:
        if state.mood is Mood.HOPEFUL:
            actions.append(state.trial_action)
        else:
            actions.append(state.baseline_action)
    proposals: list[tuple[int, ...]] = [()] * m
    for i, target in enumerate(actions):
        if target != UNMATCHED:
            proposals[target] = proposals[target] + (i,)
    menus = [atl_act_branches(gstate.acceptors[j], proposals[j]) for j in range(m)]
    for pick in itertools.product(*menus):
        prob = Fraction(1)
        for const, _ in pick:
            prob *= const
        partner = [UNMATCHED] * n
        for j, (_, chosen) in enumerate(pick):
            if chosen != UNMATCHED:
                partner[chosen] = j
        yield prob, tuple(partner)


def matching_mass(chain: ExactChain, pi: StationaryResult, market: Market) -> MatchingMass:
    """Project stationary state mass onto the matchings the states reproduce."""
    accumulator: dict[tuple[int, ...], object] = {}
    for i, weight in enumerate(pi.probabilities):
        if weight == 0:
            continue
        for prob, key in _zero_rate_matchings(market, chain.states[i]):
            share = weight * prob
            accumulator[key] = accumulator.get(key, 0) + share
    per_matching = {Matching(key, market.m): mass for key, mass in accumulator.items()}
    stable = sum(
        (mass for mu, mass in per_matching.items() if is_stable(market, mu)), start=0
    )
    target = deferred_acceptance(market, Side.ACCEPTOR)
    optimal = per_matching.get(target, 0)
    return MatchingMass(per_matching, stable, optimal)

"""Resistance graphs over matchings and stochastic-stability prediction.

Nodes are the matchings of a small market. Unstable matchings point to the
result of resolving each of their blocking pairs; stable matchings carry the
always-available exit that dissolves one matched pair at resistance 2. The
stochastically stable set is predicted as the roots of minimum-weight
spanning in-trees.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .arborescence import min_in_tree as _solve_in_tree
from .engine import ATL_STAR, PolicyCombo
from .market import (
    ENUMERATION_CAP,
    UNMATCHED,
    AgentId,
    Market,
    Matching,
    Side,
    TooLarge,
    best_response_dynamics,
    blocking_pairs,
    deferred_acceptance,
    iter_matchings,
    near_stable,
    resolve_blocking_pair,
)

STABLE_EXIT_WEIGHT = Fraction(2)


class Unreachable(RuntimeError):
    pass


@dataclass(frozen=True)
class ResistanceEdge:
    src: Matching
    dst: Matching
    weight: object
    mechanism: str  # "blocking-pair" | "stable-exit" | "double-experiment"
    detail: tuple


@dataclass
class ResistanceGraph:
    market: Market
    acceptor_policy: str
    nodes: list[Matching]
    edges: list[ResistanceEdge]
    _out: dict[Matching, list[ResistanceEdge]] = field(default_factory=dict, repr=False)

    def out_edges(self, mu: Matching) -> list[ResistanceEdge]:
        if not self._out:
            for edge in self.edges:
                self._out.setdefault(edge.src, []).append(edge)
        return self._out.get(mu, [])

    def stable_nodes(self) -> list[Matching]:
        unstable = {edge.src for edge in self.edges if edge.mechanism == "blocking-pair"}
        return [mu for mu in self.nodes if mu not in unstable]

    def to_dot(self) -> str:
        labels = {mu: f"n{k}" for k, mu in enumerate(self.nodes)}
        stable = set(self.stable_nodes())
        lines = ["digraph resistance {"]
        for mu, name in labels.items():
            text = " ".join(str(v) for v in mu.to_list())
            shape = ' shape=doublecircle style=bold' if mu in stable else ""
            lines.append(f'  {name} [label="{text}"{shape}];')
        for edge in self.edges:
            lines.append(
                f'  {labels[edge.src]} -> {labels[edge.dst]} '
                f'[label="{float(edge.weight):.4g}"];'
            )
        lines.append("}")
        return "\n".join(lines)


def build_resistance_graph(
    market: Market,
    combo: PolicyCombo,
    include_double_experiment_exits: bool = False,
    cap: int = ENUMERATION_CAP,
) -> ResistanceGraph:
    """All matchings as nodes, with the transition weights the dynamics induce.

    Blocking-pair edges weigh 1 under plain acceptor learning; under the
    acceptor-optimal rule they weigh 1 plus the acceptance exponent of the
    blocking acceptor at the utility it would gain (content exponent when
    matched, discontent exponent when single). Stable matchings get one
    weight-2 exit per matched proposer, landing on the near-stable matching
    with that pair dissolved; the optional double-experiment exits add
    weight-2 partner swaps.
    """
    if max(market.n, market.m) > cap:
        raise TooLarge(f"{market.n}x{market.m} exceeds cap {cap}")
    star = combo.acceptor_policy == ATL_STAR
    nodes = list(iter_matchings(market.n, market.m))
    edges: list[ResistanceEdge] = []
    for mu in nodes:
        bps = blocking_pairs(market, mu)
        if bps:
            acceptor_side = mu.acceptor_partner()
            for bp in bps:
                nu = resolve_blocking_pair(market, mu, bp)
                if star:
                    gain = market.acceptor_utils[bp.acceptor][bp.proposer]
                    if acceptor_side[bp.acceptor] != UNMATCHED:
                        exponent = combo.exploit.content_exponent(gain)
                    else:
                        exponent = combo.exploit.discontent_exponent(gain)
                    weight = 1 + exponent
                else:
                    weight = Fraction(1)
                edges.append(
                    ResistanceEdge(mu, nu, weight, "blocking-pair", (bp.proposer, bp.acceptor))
                )
            continue
        pairs = mu.pairs()
        for i, _ in pairs:
            nu = near_stable(market, mu, AgentId(Side.PROPOSER, i))
            edges.append(ResistanceEdge(mu, nu, STABLE_EXIT_WEIGHT, "stable-exit", (i,)))
        if include_double_experiment_exits and len(pairs) >= 2:
            for a in range(len(pairs)):
                for b in range(a + 1, len(pairs)):
                    i1, j1 = pairs[a]
                    i2, j2 = pairs[b]
                    partners = list(mu.proposer_partner)
                    partners[i1], partners[i2] = j2, j1
                    nu = Matching(tuple(partners), market.m)
                    edges.append(
                        ResistanceEdge(
                            mu, nu, STABLE_EXIT_WEIGHT, "double-experiment", (i1, i2)
                        )
                    )
    return ResistanceGraph(market, combo.acceptor_policy, nodes, edges)


@dataclass
class InTree:
    root: Matching
    parent_edge: dict[Matching, ResistanceEdge]
    total_weight: object


def min_in_tree(graph: ResistanceGraph, root: Matching) -> InTree | None:
    """Minimum-weight in-tree of the resistance graph rooted at `root`."""
    index = {mu: k for k, mu in enumerate(graph.nodes)}
    edge_list = [(index[e.src], index[e.dst], e.weight) for e in graph.edges]
    result = _solve_in_tree(len(graph.nodes), edge_list, index[root])
    if result is None:
        return None
    parent = {graph.nodes[v]: graph.edges[ref] for v, ref in result.parent_edge.items()}
    return InTree(root, parent, result.total_weight)


def min_in_tree_roots(graph: ResistanceGraph) -> set[Matching]:
    """Roots of globally minimum-weight in-trees (the predicted stable set).

    Nodes are screened with the lower bound "sum of everyone else's cheapest
    exit": a candidate whose bound already exceeds the best exact tree weight
    cannot be a root, which in practice reduces the exact computations to the
    stable matchings.
    """
    cheapest: dict[Matching, object] = {}
    for edge in graph.edges:
        held = cheapest.get(edge.src)
        if held is None or edge.weight < held:
            cheapest[edge.src] = edge.weight
    no_exit = [mu for mu in graph.nodes if mu not in cheapest]
    if len(no_exit) > 1:
        raise Unreachable("two or more nodes have no outgoing edges")

    total_cheapest = sum(cheapest.values(), start=Fraction(0))
    if no_exit:
        candidates = no_exit
    else:
        candidates = sorted(
            graph.nodes,
            key=lambda mu: float(total_cheapest - cheapest[mu]),
        )
    best = None
    weights: dict[Matching, object] = {}
    for mu in candidates:
        bound = total_cheapest - cheapest.get(mu, Fraction(0))
        if best is not None and bound > best:
            break
        tree = min_in_tree(graph, mu)
        if tree is None:
            continue
        weights[mu] = tree.total_weight
        if best is None or tree.total_weight < best:
            best = tree.total_weight
    if best is None:
        raise Unreachable("no node is reachable from every other node")
    return {mu for mu, w in weights.items() if w == best}


def acceptor_brd_check(market: Market, mu_star: Matching | None = None) -> bool:
    """Acceptor best-response dynamics from every one-pair-dissolved variant
    of the acceptor-optimal matching must lead back to it."""
    if mu_star is None:
        mu_star = deferred_acceptance(market, Side.ACCEPTOR)
    acceptor_side = mu_star.acceptor_partner()
    for j, partner in enumerate(acceptor_side):
        if partner == UNMATCHED:
            continue
        start = near_stable(market, mu_star, AgentId(Side.ACCEPTOR, j))
        sequence = best_response_dynamics(market, start, Side.ACCEPTOR)
        if sequence[-1] != mu_star:
            return False
    return True

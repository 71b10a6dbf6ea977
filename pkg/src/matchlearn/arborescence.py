"""Minimum-weight spanning in-trees of directed graphs (Chu-Liu/Edmonds).

An in-tree rooted at r gives every other node exactly one outgoing edge and a
unique directed path to r. This is the mirror image of the usual arborescence
problem, solved here directly in the in-tree orientation with the classic
select/contract/expand scheme. Results are verified structurally before they
are returned, and weights may be any totally ordered numeric type (Fractions
stay exact).
"""

from __future__ import annotations

from typing import NamedTuple, Sequence


class InEdge(NamedTuple):
    src: int
    dst: int
    weight: object


class InTreeResult(NamedTuple):
    total_weight: object
    parent_edge: dict[int, int]  # node -> index into the input edge list


def _find_cycle(successor: dict[int, int]) -> list[int] | None:
    color: dict[int, int] = {}
    for start in successor:
        if color.get(start):
            continue
        path = []
        node = start
        while node in successor and color.get(node, 0) == 0:
            color[node] = 1
            path.append(node)
            node = successor[node]
        if color.get(node) == 1:
            return path[path.index(node) :]
        for visited in path:
            color[visited] = 2
    return None


def min_in_tree(
    num_nodes: int, edges: Sequence[tuple[int, int, object]], root: int
) -> InTreeResult | None:
    """Minimum-weight spanning in-tree rooted at `root`, or None if none exists."""
    original = [InEdge(s, d, w) for s, d, w in edges]
    active = set(range(num_nodes))
    # current view: list of (src, dst, weight, original-edge-index)
    current = [(e.src, e.dst, e.weight, k) for k, e in enumerate(original) if e.src != e.dst]
    next_super = num_nodes
    member_of: dict[int, int] = {}  # node -> supernode that absorbed it
    contractions: list[tuple[int, list[int], dict[int, tuple]]] = []

    while True:
        best: dict[int, tuple] = {}
        for s, d, w, ref in current:
            if s == root:
                continue
            held = best.get(s)
            if held is None or w < held[0]:
                best[s] = (w, d, ref)
        if any(v != root and v not in best for v in active):
            return None  # some node has no way out, no spanning in-tree
        cycle = _find_cycle({v: best[v][1] for v in best})
        if cycle is None:
            break
        cycle_set = set(cycle)
        supernode = next_super
        next_super += 1
        for v in cycle:
            member_of[v] = supernode
        contractions.append((supernode, cycle, {v: best[v] for v in cycle}))
        merged = []
        for s, d, w, ref in current:
            s2 = supernode if s in cycle_set else s
            d2 = supernode if d in cycle_set else d
            if s2 == d2:
                continue
            if s in cycle_set:
                merged.append((s2, d2, w - best[s][0], ref))
            else:
                merged.append((s2, d2, w, ref))
        current = merged
        active = (active - cycle_set) | {supernode}

    pending: dict[int, int] = {v: choice[2] for v, choice in best.items()}  # node -> ref
    for supernode, cycle, cycle_best in reversed(contractions):
        ref = pending.pop(supernode)
        leaving = original[ref].src
        while leaving not in cycle:
            leaving = member_of[leaving]
        for v in cycle:
            pending[v] = ref if v == leaving else cycle_best[v][2]

    parent_edge = dict(pending)
    total = _verify(num_nodes, original, root, parent_edge)
    return InTreeResult(total, parent_edge)


def _verify(num_nodes: int, original: list[InEdge], root: int, parent_edge: dict[int, int]):
    """Check the in-tree shape and return its total weight in original units."""
    assert root not in parent_edge
    assert set(parent_edge) == set(range(num_nodes)) - {root}
    total = 0
    for v, ref in parent_edge.items():
        edge = original[ref]
        assert edge.src == v
        total = total + edge.weight
    for start in parent_edge:
        seen = set()
        node = start
        while node != root:
            assert node not in seen, "cycle in claimed in-tree"
            seen.add(node)
            node = original[parent_edge[node]].dst
    return total

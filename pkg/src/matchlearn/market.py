"""Two-sided markets, matchings, stability, and the classical matching oracles.

Utilities are kept as exact rationals so that strict-preference comparisons
and injectivity checks are never at the mercy of floating point. Floats and
decimal strings are accepted at the boundary and converted once.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterator, Sequence

UNMATCHED = -1

ENUMERATION_CAP = 7  # brute-force enumeration refuses markets larger than this


class Side(Enum):
    PROPOSER = "P"
    ACCEPTOR = "A"


@dataclass(frozen=True)
class AgentId:
    side: Side
    index: int

    def __str__(self) -> str:
        return f"{self.side.value}{self.index}"


@dataclass(frozen=True)
class BlockingPair:
    proposer: int
    acceptor: int


class MarketError(ValueError):
    """Base class for all market/matching domain errors."""


class DuplicateUtility(MarketError):
    pass


class OutOfRange(MarketError):
    pass


class NonzeroUnmatched(MarketError):
    pass


class DimensionMismatch(MarketError):
    pass


class TooLarge(MarketError):
    pass


class NotBlocking(MarketError):
    pass


class NotStable(MarketError):
    pass


class Unmatched(MarketError):
    pass


def as_rational(value) -> Fraction:
    """Convert a boundary value (str, float, int, Fraction) to an exact Fraction.

    Decimal strings convert exactly ("0.35" -> 7/20); floats convert via their
    shortest decimal repr so that 0.35 means 35/100, not the binary float.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as a rational utility")


def rational_to_decimal(value: Fraction) -> str:
    """Exact decimal string for a Fraction whose denominator is 2^a * 5^b."""
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        raise ValueError(f"{value} has no finite decimal expansion")
    shift = max(twos, fives)
    scaled = value.numerator * 10**shift // value.denominator
    if shift == 0:
        return str(scaled)
    sign = "-" if scaled < 0 else ""
    digits = str(abs(scaled)).rjust(shift + 1, "0")
    return f"{sign}{digits[:-shift]}.{digits[-shift:]}"


@dataclass(frozen=True)
class Matching:
    """A mutual partner assignment; UNMATCHED (-1) marks a single agent."""

    proposer_partner: tuple[int, ...]
    num_acceptors: int

    @property
    def num_proposers(self) -> int:
        return len(self.proposer_partner)

    def acceptor_partner(self) -> tuple[int, ...]:
        partners = [UNMATCHED] * self.num_acceptors
        for i, j in enumerate(self.proposer_partner):
            if j != UNMATCHED:
                partners[j] = i
        return tuple(partners)

    def partner_of(self, agent: AgentId) -> int:
        if agent.side is Side.PROPOSER:
            return self.proposer_partner[agent.index]
        return self.acceptor_partner()[agent.index]

    def pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i, j in enumerate(self.proposer_partner) if j != UNMATCHED]

    def is_matched(self, agent: AgentId) -> bool:
        return self.partner_of(agent) != UNMATCHED

    @staticmethod
    def all_unmatched(n: int, m: int) -> "Matching":
        return Matching((UNMATCHED,) * n, m)

    @staticmethod
    def from_pairs(n: int, m: int, pairs: Sequence[tuple[int, int]]) -> "Matching":
        partners = [UNMATCHED] * n
        seen_acceptors = set()
        for i, j in pairs:
            if not (0 <= i < n and 0 <= j < m):
                raise DimensionMismatch(f"pair ({i}, {j}) out of range for {n}x{m}")
            if partners[i] != UNMATCHED or j in seen_acceptors:
                raise DimensionMismatch(f"agent repeated in pairs: ({i}, {j})")
            partners[i] = j
            seen_acceptors.add(j)
        return Matching(tuple(partners), m)

    def to_list(self) -> list[int]:
        return list(self.proposer_partner)

    @staticmethod
    def from_list(values: Sequence[int], num_acceptors: int) -> "Matching":
        mu = Matching(tuple(int(v) for v in values), num_acceptors)
        seen = set()
        for j in mu.proposer_partner:
            if j == UNMATCHED:
                continue
            if not 0 <= j < num_acceptors or j in seen:
                raise DimensionMismatch(f"invalid partner list {values!r}")
            seen.add(j)
        return mu


@dataclass(frozen=True)
class Market:
    """A two-sided market: rosters and injective cardinal utilities in [0, 1).

    proposer_utils[i][j] is proposer i's utility for acceptor j;
    acceptor_utils[j][i] is acceptor j's utility for proposer i.
    Being unmatched is worth exactly 0 to everyone.
    """

    n: int
    m: int
    proposer_utils: tuple[tuple[Fraction, ...], ...]
    acceptor_utils: tuple[tuple[Fraction, ...], ...]

    def proposer_utility(self, i: int, j: int) -> Fraction:
        return self.proposer_utils[i][j] if j != UNMATCHED else Fraction(0)

    def acceptor_utility(self, j: int, i: int) -> Fraction:
        return self.acceptor_utils[j][i] if i != UNMATCHED else Fraction(0)

    def proposer_prefers(self, i: int, j_new: int, j_old: int) -> bool:
        return self.proposer_utility(i, j_new) > self.proposer_utility(i, j_old)

    def acceptor_prefers(self, j: int, i_new: int, i_old: int) -> bool:
        return self.acceptor_utility(j, i_new) > self.acceptor_utility(j, i_old)

    def check_matching(self, mu: Matching) -> None:
        if mu.num_proposers != self.n or mu.num_acceptors != self.m:
            raise DimensionMismatch(
                f"matching is {mu.num_proposers}x{mu.num_acceptors}, market is {self.n}x{self.m}"
            )

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "proposer_utils": [
                [rational_to_decimal(u) for u in row] for row in self.proposer_utils
            ],
            "acceptor_utils": [
                [rational_to_decimal(u) for u in row] for row in self.acceptor_utils
            ],
        }

    def fingerprint(self) -> str:
        # hashed over exact fraction strings so markets whose utilities have
        # no finite decimal expansion still fingerprint
        payload = json.dumps(
            {
                "n": self.n,
                "m": self.m,
                "proposer_utils": [[str(u) for u in row] for row in self.proposer_utils],
                "acceptor_utils": [[str(u) for u in row] for row in self.acceptor_utils],
            },
            sort_keys=True,
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def validate_market(
    n: int,
    m: int,
    proposer_utils: Sequence[Sequence],
    acceptor_utils: Sequence[Sequence],
) -> Market:
    """Build a Market from raw tables, enforcing every invariant.

    Rows may have one trailing extra entry giving the agent's unmatched
    utility explicitly; it must be zero.
    """
    if n < 1 or m < 1:
        raise DimensionMismatch("market needs at least one agent per side")

    def clean_row(row, width, who):
        values = [as_rational(v) for v in row]
        if len(values) == width + 1:
            if values[width] != 0:
                raise NonzeroUnmatched(f"{who}: unmatched utility must be 0")
            values = values[:width]
        if len(values) != width:
            raise DimensionMismatch(f"{who}: expected {width} utilities, got {len(row)}")
        for u in values:
            if not (0 <= u < 1):
                raise OutOfRange(f"{who}: utility {u} outside [0, 1)")
        if len(set(values)) != len(values) or any(u == 0 for u in values):
            # 0 is reserved for unmatched, so a zero entry also breaks injectivity
            raise DuplicateUtility(f"{who}: utilities must be distinct and nonzero")
        return tuple(values)

    if len(proposer_utils) != n or len(acceptor_utils) != m:
        raise DimensionMismatch("utility tables do not cover all agents")
    prop = tuple(clean_row(row, m, f"proposer {i}") for i, row in enumerate(proposer_utils))
    acc = tuple(clean_row(row, n, f"acceptor {j}") for j, row in enumerate(acceptor_utils))
    return Market(n, m, prop, acc)


def random_market(n: int, m: int, seed: int) -> Market:
    """Deterministic random market with distinct 6-decimal-digit utilities."""
    if n < 1 or m < 1:
        raise DimensionMismatch("market needs at least one agent per side")
    rng = random.Random(seed)
    denom = 10**6
    prop = tuple(
        tuple(Fraction(v, denom) for v in rng.sample(range(1, denom), m)) for _ in range(n)
    )
    acc = tuple(
        tuple(Fraction(v, denom) for v in rng.sample(range(1, denom), n)) for _ in range(m)
    )
    return Market(n, m, prop, acc)


def market_to_json(market: Market) -> str:
    return json.dumps(market.to_json_dict(), indent=2)


def market_from_json_dict(data: dict) -> Market:
    try:
        return validate_market(
            int(data["n"]), int(data["m"]), data["proposer_utils"], data["acceptor_utils"]
        )
    except KeyError as missing:
        raise DimensionMismatch(f"market JSON missing field {missing}") from None


def market_from_json(text: str) -> Market:
    return market_from_json_dict(json.loads(text))


def blocking_pairs(market: Market, mu: Matching) -> list[BlockingPair]:
    """All blocking pairs of mu, lexicographic by (proposer, acceptor)."""
    market.check_matching(mu)
    acceptor_side = mu.acceptor_partner()
    found = []
    for i in range(market.n):
        held_i = market.proposer_utility(i, mu.proposer_partner[i])
        row = market.proposer_utils[i]
        for j in range(market.m):
            if row[j] > held_i and market.acceptor_utils[j][i] > market.acceptor_utility(
                j, acceptor_side[j]
            ):
                found.append(BlockingPair(i, j))
    return found


def is_stable(market: Market, mu: Matching) -> bool:
    """True iff no proposer-acceptor pair strictly prefers each other.

    Kept independent of blocking_pairs() on purpose: the two are
    cross-checked against each other in the test suite.
    """
    market.check_matching(mu)
    acceptor_side = mu.acceptor_partner()
    for j in range(market.m):
        held_j = market.acceptor_utility(j, acceptor_side[j])
        for i in range(market.n):
            if market.acceptor_utils[j][i] > held_j and market.proposer_utils[i][
                j
            ] > market.proposer_utility(i, mu.proposer_partner[i]):
                return False
    return True


def deferred_acceptance(market: Market, proposing_side: Side) -> Matching:
    """Gale-Shapley deferred acceptance; the proposing side gets its optimum.

    With proposing_side=ACCEPTor the result is the acceptor-optimal stable
    matching, which every acceptor weakly prefers to any other stable one.
    """
    if proposing_side is Side.PROPOSER:
        num_active, num_passive = market.n, market.m
        active_utils = market.proposer_utils
        passive_utils = market.acceptor_utils
    else:
        num_active, num_passive = market.m, market.n
        active_utils = market.acceptor_utils
        passive_utils = market.proposer_utils

    # Preference order over passive agents, best first.
    pref = [
        sorted(range(num_passive), key=lambda q: active_utils[a][q], reverse=True)
        for a in range(num_active)
    ]
    next_choice = [0] * num_active
    holds: list[int] = [UNMATCHED] * num_passive
    free = list(range(num_active - 1, -1, -1))  # pop() yields lowest index first
    while free:
        a = free.pop()
        while next_choice[a] < num_passive:
            q = pref[a][next_choice[a]]
            next_choice[a] += 1
            current = holds[q]
            if current == UNMATCHED:
                holds[q] = a
                break
            if passive_utils[q][a] > passive_utils[q][current]:
                holds[q] = a
                free.append(current)
                break
        # an active agent that exhausts its list stays unmatched

    if proposing_side is Side.PROPOSER:
        partners = [UNMATCHED] * market.n
        for j, i in enumerate(holds):
            if i != UNMATCHED:
                partners[i] = j
        return Matching(tuple(partners), market.m)
    return Matching(tuple(holds), market.m)


def iter_matchings(n: int, m: int) -> Iterator[Matching]:
    """Every matching of an n x m market, partial ones included."""

    def extend(i: int, partners: list[int], used: set[int]) -> Iterator[Matching]:
        if i == n:
            yield Matching(tuple(partners), m)
            return
        partners.append(UNMATCHED)
        yield from extend(i + 1, partners, used)
        partners.pop()
        for j in range(m):
            if j not in used:
                partners.append(j)
                used.add(j)
                yield from extend(i + 1, partners, used)
                used.remove(j)
                partners.pop()

    yield from extend(0, [], set())


def enumerate_stable(market: Market, cap: int = ENUMERATION_CAP) -> list[Matching]:
    """Brute-force list of all stable matchings. Refuses markets above cap."""
    if max(market.n, market.m) > cap:
        raise TooLarge(f"{market.n}x{market.m} exceeds enumeration cap {cap}")
    stable = [mu for mu in iter_matchings(market.n, market.m) if is_stable(market, mu)]
    return stable


def is_blocking(market: Market, mu: Matching, bp: BlockingPair) -> bool:
    acceptor_side = mu.acceptor_partner()
    return market.proposer_utils[bp.proposer][bp.acceptor] > market.proposer_utility(
        bp.proposer, mu.proposer_partner[bp.proposer]
    ) and market.acceptor_utils[bp.acceptor][bp.proposer] > market.acceptor_utility(
        bp.acceptor, acceptor_side[bp.acceptor]
    )


def resolve_blocking_pair(market: Market, mu: Matching, bp: BlockingPair) -> Matching:
    """Match the pair with each other; their former partners become single."""
    market.check_matching(mu)
    if not is_blocking(market, mu, bp):
        raise NotBlocking(f"({bp.proposer}, {bp.acceptor}) does not block this matching")
    partners = list(mu.proposer_partner)
    old_proposer = mu.acceptor_partner()[bp.acceptor]
    if old_proposer != UNMATCHED:
        partners[old_proposer] = UNMATCHED
    partners[bp.proposer] = bp.acceptor
    return Matching(tuple(partners), market.m)


def near_stable(market: Market, mu: Matching, agent: AgentId) -> Matching:
    """Dissolve one matched pair of a stable matching; all else unchanged."""
    market.check_matching(mu)
    if not is_stable(market, mu):
        raise NotStable("near-stable matchings are defined on stable matchings only")
    partner = mu.partner_of(agent)
    if partner == UNMATCHED:
        raise Unmatched(f"{agent} has no partner to dissolve")
    proposer = agent.index if agent.side is Side.PROPOSER else partner
    partners = list(mu.proposer_partner)
    partners[proposer] = UNMATCHED
    return Matching(tuple(partners), market.m)


def _best_blocking_for(
    market: Market, bps: list[BlockingPair], agent: AgentId
) -> BlockingPair:
    """The agent's most preferred blocking pair among those it belongs to."""
    if agent.side is Side.PROPOSER:
        mine = [bp for bp in bps if bp.proposer == agent.index]
        return max(mine, key=lambda bp: market.proposer_utils[bp.proposer][bp.acceptor])
    mine = [bp for bp in bps if bp.acceptor == agent.index]
    return max(mine, key=lambda bp: market.acceptor_utils[bp.acceptor][bp.proposer])


def blocking_path_to_stability(
    market: Market, mu: Matching, rng_seed: int = 0
) -> list[tuple[BlockingPair, Matching]]:
    """A finite sequence of blocking-pair resolutions ending at a stable matching.

    Incremental activation: agents join an active set one at a time (order
    seeded); after each join, internal blocking pairs are resolved with the
    most recently destabilized agent taking its best available partner, so
    the displacement chain mimics deferred acceptance and terminates.
    """
    market.check_matching(mu)
    rng = random.Random(rng_seed)
    agents = [AgentId(Side.PROPOSER, i) for i in range(market.n)] + [
        AgentId(Side.ACCEPTOR, j) for j in range(market.m)
    ]
    rng.shuffle(agents)

    active: set[AgentId] = set()
    path: list[tuple[BlockingPair, Matching]] = []
    guard = 16 * (market.n + market.m) ** 4 + 256

    def internal(bps: list[BlockingPair]) -> list[BlockingPair]:
        return [
            bp
            for bp in bps
            if AgentId(Side.PROPOSER, bp.proposer) in active
            and AgentId(Side.ACCEPTOR, bp.acceptor) in active
        ]

    for newcomer in agents:
        active.add(newcomer)
        stack = [newcomer]
        while True:
            bps = internal(blocking_pairs(market, mu))
            if not bps:
                break
            chosen = None
            while stack:
                g = stack[-1]
                if g.side is Side.PROPOSER:
                    involved = [bp for bp in bps if bp.proposer == g.index]
                else:
                    involved = [bp for bp in bps if bp.acceptor == g.index]
                if involved:
                    chosen = _best_blocking_for(market, involved, g)
                    break
                stack.pop()
            if chosen is None:
                chosen = bps[0]  # defensive; lexicographically first
            before = mu.acceptor_partner()
            displaced_p = before[chosen.acceptor]
            displaced_a = mu.proposer_partner[chosen.proposer]
            mu = resolve_blocking_pair(market, mu, chosen)
            path.append((chosen, mu))
            if displaced_p != UNMATCHED:
                stack.append(AgentId(Side.PROPOSER, displaced_p))
            if displaced_a != UNMATCHED:
                stack.append(AgentId(Side.ACCEPTOR, displaced_a))
            if len(path) > guard:
                raise RuntimeError("blocking path failed to terminate (bug)")
    return path


def best_response_dynamics(market: Market, mu: Matching, side: Side) -> list[Matching]:
    """Two-phase best-response dynamics for one side; ends at a stable matching.

    Phase 1: while any matched agent of `side` is in a blocking pair, the
    lowest-indexed such agent resolves its most preferred one. Phase 2 does
    the same for unmatched agents of `side`.
    """
    market.check_matching(mu)
    sequence = [mu]
    guard = 16 * (market.n + market.m) ** 4 + 256
    while True:
        bps = blocking_pairs(market, mu)
        if not bps:
            return sequence
        if side is Side.PROPOSER:
            blockers = sorted({bp.proposer for bp in bps})
            matched = [i for i in blockers if mu.proposer_partner[i] != UNMATCHED]
        else:
            acceptor_side = mu.acceptor_partner()
            blockers = sorted({bp.acceptor for bp in bps})
            matched = [j for j in blockers if acceptor_side[j] != UNMATCHED]
        index = matched[0] if matched else blockers[0]
        agent = AgentId(side, index)
        chosen = _best_blocking_for(market, bps, agent)
        mu = resolve_blocking_pair(market, mu, chosen)
        sequence.append(mu)
        if len(sequence) > guard:
            raise RuntimeError("best-response dynamics failed to terminate (bug)")

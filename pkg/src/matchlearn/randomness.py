"""Randomness plumbing for simulation runs.

Every agent consumes its own stream derived from the master seed, so runs
are reproducible regardless of iteration order, and a scripted source can
force exact experimentation sequences for path-level tests.
"""

from __future__ import annotations

import hashlib
import random

from .market import UNMATCHED


def derive_seed(master_seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{master_seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class _Queued:
    """Stream that replays queued draws, then falls through to a base stream."""

    __slots__ = ("queue", "base")

    def __init__(self, queue, base):
        self.queue = queue
        self.base = base

    def random(self) -> float:
        if self.queue:
            return self.queue.pop(0)
        return self.base.random()


class _Constant:
    __slots__ = ("value",)

    def __init__(self, value: float):
        self.value = value

    def random(self) -> float:
        return self.value


_NEVER = _Constant(1.0 - 1e-12)


class SeededRandomness:
    """Per-agent streams keyed off one master seed."""

    def __init__(self, master_seed: int, num_proposers: int, num_acceptors: int):
        self.master_seed = master_seed
        self._proposers = [
            random.Random(derive_seed(master_seed, f"P{i}")) for i in range(num_proposers)
        ]
        self._acceptors = [
            random.Random(derive_seed(master_seed, f"A{j}")) for j in range(num_acceptors)
        ]
        self._acceptor_updates = [
            random.Random(derive_seed(master_seed, f"AU{j}")) for j in range(num_acceptors)
        ]

    def proposer_stream(self, i: int, t: int):
        return self._proposers[i]

    def acceptor_stream(self, j: int, t: int):
        return self._acceptors[j]

    def acceptor_update_stream(self, j: int, t: int):
        return self._acceptor_updates[j]


class ScriptedRandomness:
    """Randomness source whose draws can be forced per agent and timestep.

    Unforced proposers repeat their baseline when suppress_experimentation is
    set (the default), which makes the zero-rate dynamics directly walkable.
    """

    def __init__(
        self,
        epsilon: float,
        num_acceptors: int,
        base: SeededRandomness | None = None,
        suppress_experimentation: bool = True,
    ):
        self.epsilon = epsilon
        self.num_acceptors = num_acceptors
        self.base = base
        self.suppress = suppress_experimentation
        self._proposer_queues: dict[tuple[int, int], list[float]] = {}
        self._acceptor_queues: dict[tuple[int, int], list[float]] = {}
        self._update_queues: dict[tuple[int, int], list[float]] = {}

    # -- forcing helpers ------------------------------------------------

    def force_proposer_action(self, t: int, i: int, action: int) -> None:
        """Make proposer i play `action` at step t (only binds in moods C/D)."""
        eps = self.epsilon
        if action == UNMATCHED:
            draws = [0.0]  # lands in the eps^2 branch
        else:
            # land in the uniform-experiment branch, then pick the target
            draws = [eps * eps, (action + 0.5) / self.num_acceptors]
        self._proposer_queues.setdefault((i, t), []).extend(draws)

    def force_proposer_baseline(self, t: int, i: int) -> None:
        self._proposer_queues.setdefault((i, t), []).append(1.0 - 1e-12)

    def force_acceptor_choice(self, t: int, j: int, draw: float) -> None:
        self._acceptor_queues.setdefault((j, t), []).append(draw)

    def force_acceptor_update(self, t: int, j: int, seize: bool) -> None:
        value = 0.0 if seize else 1.0 - 1e-12
        self._update_queues.setdefault((j, t), []).append(value)

    # -- stream interface -------------------------------------------------

    def _stream(self, queues, key, fallback):
        queue = queues.get(key)
        if queue:
            return _Queued(queue, fallback)
        return fallback

    def proposer_stream(self, i: int, t: int):
        fallback = (
            _NEVER
            if self.suppress or self.base is None
            else self.base.proposer_stream(i, t)
        )
        return self._stream(self._proposer_queues, (i, t), fallback)

    def acceptor_stream(self, j: int, t: int):
        fallback = _NEVER if self.base is None else self.base.acceptor_stream(j, t)
        return self._stream(self._acceptor_queues, (j, t), fallback)

    def acceptor_update_stream(self, j: int, t: int):
        fallback = (
            _NEVER if self.base is None else self.base.acceptor_update_stream(j, t)
        )
        return self._stream(self._update_queues, (j, t), fallback)

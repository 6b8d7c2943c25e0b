"""Lamport timestamps, unique tags, vector clocks, and causal delivery envelopes."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, Optional

ReplicaId = str


@dataclass(frozen=True, order=True)
class LamportStamp:
    """Totally ordered logical timestamp; ties on the counter break by origin."""

    counter: int
    origin: ReplicaId

    def render(self) -> str:
        return f"{self.counter}@{self.origin}"


@dataclass(frozen=True, order=True)
class Tag:
    """Globally unique identifier minted by one replica."""

    origin: ReplicaId
    seq: int

    def render(self) -> str:
        return f"{self.origin}.{self.seq}"


class VectorClock:
    """Per-origin delivery counts with entrywise merge and partial-order compare."""

    def __init__(self, counts: Optional[Dict[ReplicaId, int]] = None):
        self.counts: Dict[ReplicaId, int] = dict(counts or {})

    def get(self, origin: ReplicaId) -> int:
        return self.counts.get(origin, 0)

    def increment(self, origin: ReplicaId) -> None:
        self.counts[origin] = self.get(origin) + 1

    def merge(self, other: "VectorClock") -> None:
        for origin, count in other.counts.items():
            if count > self.get(origin):
                self.counts[origin] = count

    def dominates(self, other: "VectorClock") -> bool:
        """True iff self >= other entrywise (absent entries read as zero)."""
        return all(self.get(o) >= c for o, c in other.counts.items())

    def copy(self) -> "VectorClock":
        return VectorClock(self.counts)

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, VectorClock):
            return NotImplemented
        return {o: c for o, c in self.counts.items() if c} == {
            o: c for o, c in other.counts.items() if c
        }

    def __repr__(self) -> str:
        inner = ",".join(f"{o}:{c}" for o, c in sorted(self.counts.items()))
        return f"VectorClock({inner})"


@dataclass(frozen=True)
class Envelope:
    """An op in flight: payload plus origin, causal dependencies, and stamp.

    deps snapshots the sender's delivered clock at generation time, so
    deps.get(origin) counts the sender's own earlier ops and doubles as the
    per-origin sequence number minus one.
    """

    payload: Any
    origin: ReplicaId
    deps: VectorClock
    stamp: LamportStamp

    @property
    def seq(self) -> int:
        return self.deps.get(self.origin) + 1


def deliverable(env: Envelope, delivered: VectorClock) -> bool:
    """True iff all causal dependencies are met and origin FIFO order holds."""
    return delivered.dominates(env.deps) and delivered.get(env.origin) == env.seq - 1


@dataclass
class ReplicaClock:
    """Per-replica sources of timestamps, tags, randomness, and delivery state."""

    replica_id: ReplicaId
    seed: int = 0
    counter: int = 0
    tag_seq: int = 0
    delivered: VectorClock = field(default_factory=VectorClock)
    rng: random.Random = field(init=False)

    def __post_init__(self):
        self.rng = random.Random(f"{self.seed}/{self.replica_id}")

    def next_stamp(self) -> LamportStamp:
        self.counter += 1
        return LamportStamp(self.counter, self.replica_id)

    def fresh_tag(self) -> Tag:
        self.tag_seq += 1
        return Tag(self.replica_id, self.tag_seq)

    def observe(self, stamp: LamportStamp) -> None:
        """Advance the local counter past a received stamp."""
        if stamp.counter > self.counter:
            self.counter = stamp.counter

    def wrap(self, payload: Any) -> Envelope:
        """Build the envelope for a locally generated op and count it as delivered."""
        env = Envelope(
            payload=payload,
            origin=self.replica_id,
            deps=self.delivered.copy(),
            stamp=self.next_stamp(),
        )
        self.delivered.increment(self.replica_id)
        return env

    def accept(self, env: Envelope) -> None:
        """Record delivery of a remote envelope."""
        self.delivered.increment(env.origin)
        self.observe(env.stamp)


class DeliveryBuffer:
    """Holds incoming envelopes until their causal dependencies are satisfied."""

    def __init__(self):
        self.pending: list = []

    def add(self, env: Envelope) -> None:
        self.pending.append(env)

    def drain(self, delivered: VectorClock) -> Iterator[Envelope]:
        """Yield envelopes as they become deliverable; caller must accept each."""
        progress = True
        while progress:
            progress = False
            for env in list(self.pending):
                if deliverable(env, delivered):
                    self.pending.remove(env)
                    progress = True
                    yield env
                    break

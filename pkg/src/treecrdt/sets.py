"""Five replicated set types, each in a state-based and an op-based flavor.

State-based payloads converge by merge; op-based payloads converge by applying
every op exactly once in causal order.  Local generation both mutates the local
payload and returns the op, so one history can drive either flavor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, FrozenSet, Optional, Set

from .clocks import LamportStamp, ReplicaClock, Tag
from .errors import KindMismatch, PreconditionViolation
from .render import render, sorted_elements

KINDS = ("g", "2p", "lww", "c", "or")
FLAVORS = ("state", "op")

ADD = "add"
RMV = "rmv"


@dataclass(frozen=True)
class SetOp:
    """One generated add or remove, with whatever metadata its kind needs."""

    verb: str
    element: Any
    stamp: Optional[LamportStamp] = None
    delta: Optional[int] = None
    tag: Optional[Tag] = None
    tags: Optional[FrozenSet[Tag]] = None

    def canonical(self) -> str:
        parts = [f"op {self.verb} {render(self.element)}"]
        if self.stamp is not None:
            parts.append(f"stamp={self.stamp.render()}")
        if self.delta is not None:
            parts.append(f"delta={self.delta}")
        if self.tag is not None:
            parts.append(f"tag={self.tag.render()}")
        if self.tags is not None:
            parts.append("tags=" + render(set(self.tags)))
        return " ".join(parts)


class SetCrdt:
    """Common surface: lookup, checked generation, unchecked generation, sync."""

    kind: str = ""

    def __init__(self, flavor: str):
        if flavor not in FLAVORS:
            raise KindMismatch(f"unknown flavor {flavor!r}")
        self.flavor = flavor

    def lookup(self) -> Set[Any]:
        raise NotImplementedError

    def contains(self, e: Any) -> bool:
        return e in self.lookup()

    def gen_add(self, e: Any, clock: ReplicaClock) -> SetOp:
        if self.contains(e):
            raise PreconditionViolation(f"{render(e)} already present")
        return self.local_add(e, clock)

    def gen_rmv(self, e: Any, clock: ReplicaClock) -> SetOp:
        if not self.contains(e):
            raise PreconditionViolation(f"{render(e)} not present")
        return self.local_rmv(e, clock)

    def local_add(self, e: Any, clock: ReplicaClock) -> SetOp:
        """Mutate the local payload for an add without the membership check.

        Tree types call this directly: their preconditions are evaluated on
        the lookup tree, which can disagree with raw set membership.
        """
        raise NotImplementedError

    def local_rmv(self, e: Any, clock: ReplicaClock) -> SetOp:
        raise NotImplementedError

    def apply(self, op: SetOp) -> None:
        """Apply a remote op; op-based flavor only, exactly once, causal order."""
        raise NotImplementedError

    def merge(self, other: "SetCrdt") -> None:
        """Fold another replica's state into this one; state-based flavor only."""
        raise NotImplementedError

    def copy(self) -> "SetCrdt":
        raise NotImplementedError

    def max_stamp(self) -> Optional[LamportStamp]:
        """Largest timestamp stored in the payload, if the kind keeps any."""
        return None

    def canonical(self) -> str:
        header = f"set kind={self.kind} flavor={self.flavor}"
        body = self._canonical_lines()
        return "\n".join([header] + body)

    def _canonical_lines(self) -> list:
        raise NotImplementedError

    def _check_peer(self, other: "SetCrdt") -> None:
        if self.kind != other.kind or self.flavor != other.flavor:
            raise KindMismatch(
                f"cannot merge {other.kind}/{other.flavor} into {self.kind}/{self.flavor}"
            )

    def _require_flavor(self, flavor: str, what: str) -> None:
        if self.flavor != flavor:
            raise KindMismatch(f"{what} requires the {flavor}-based flavor")


class GSet(SetCrdt):
    """Grow-only set: adds union together and nothing is ever removed."""

    kind = "g"

    def __init__(self, flavor: str):
        super().__init__(flavor)
        self.elements: Set[Any] = set()

    def lookup(self) -> Set[Any]:
        return set(self.elements)

    def local_add(self, e: Any, clock: ReplicaClock) -> SetOp:
        self.elements.add(e)
        return SetOp(ADD, e)

    def local_rmv(self, e: Any, clock: ReplicaClock) -> SetOp:
        raise PreconditionViolation("grow-only sets do not support removal")

    def apply(self, op: SetOp) -> None:
        self._require_flavor("op", "apply")
        if op.verb != ADD:
            raise PreconditionViolation("grow-only sets do not support removal")
        self.elements.add(op.element)

    def merge(self, other: SetCrdt) -> None:
        self._require_flavor("state", "merge")
        self._check_peer(other)
        self.elements |= other.elements

    def copy(self) -> "GSet":
        dup = GSet(self.flavor)
        dup.elements = set(self.elements)
        return dup

    def _canonical_lines(self) -> list:
        return [f"elem {render(e)}" for e in sorted_elements(self.elements)]


class TwoPhaseSet(SetCrdt):
    """Add-then-remove set: a removed element can never come back."""

    kind = "2p"

    def __init__(self, flavor: str):
        super().__init__(flavor)
        self.added: Set[Any] = set()
        self.removed: Set[Any] = set()

    def lookup(self) -> Set[Any]:
        return self.added - self.removed

    def gen_add(self, e: Any, clock: ReplicaClock) -> SetOp:
        if e in self.added or e in self.removed:
            raise PreconditionViolation(f"{render(e)} was already added once")
        return self.local_add(e, clock)

    def local_add(self, e: Any, clock: ReplicaClock) -> SetOp:
        if e in self.added or e in self.removed:
            raise PreconditionViolation(f"{render(e)} was already added once")
        self.added.add(e)
        return SetOp(ADD, e)

    def local_rmv(self, e: Any, clock: ReplicaClock) -> SetOp:
        self.removed.add(e)
        return SetOp(RMV, e)

    def apply(self, op: SetOp) -> None:
        self._require_flavor("op", "apply")
        if op.verb == ADD:
            self.added.add(op.element)
        else:
            self.removed.add(op.element)

    def merge(self, other: SetCrdt) -> None:
        self._require_flavor("state", "merge")
        self._check_peer(other)
        self.added |= other.added
        self.removed |= other.removed

    def copy(self) -> "TwoPhaseSet":
        dup = TwoPhaseSet(self.flavor)
        dup.added = set(self.added)
        dup.removed = set(self.removed)
        return dup

    def _canonical_lines(self) -> list:
        lines = []
        for e in sorted_elements(self.added | self.removed):
            phase = "removed" if e in self.removed else "added"
            lines.append(f"elem {render(e)} phase={phase}")
        return lines


class LwwSet(SetCrdt):
    """Last-writer-wins set: per element, the highest-stamped add or rmv rules."""

    kind = "lww"

    def __init__(self, flavor: str):
        super().__init__(flavor)
        self.entries: Dict[Any, tuple] = {}

    def lookup(self) -> Set[Any]:
        return {e for e, (_, visible) in self.entries.items() if visible}

    def local_add(self, e: Any, clock: ReplicaClock) -> SetOp:
        stamp = clock.next_stamp()
        self.entries[e] = (stamp, True)
        return SetOp(ADD, e, stamp=stamp)

    def local_rmv(self, e: Any, clock: ReplicaClock) -> SetOp:
        stamp = clock.next_stamp()
        self.entries[e] = (stamp, False)
        return SetOp(RMV, e, stamp=stamp)

    def apply(self, op: SetOp) -> None:
        self._require_flavor("op", "apply")
        current = self.entries.get(op.element)
        if current is None or current[0] < op.stamp:
            self.entries[op.element] = (op.stamp, op.verb == ADD)

    def merge(self, other: SetCrdt) -> None:
        self._require_flavor("state", "merge")
        self._check_peer(other)
        for e, pair in other.entries.items():
            if e not in self.entries or self.entries[e][0] < pair[0]:
                self.entries[e] = pair

    def copy(self) -> "LwwSet":
        dup = LwwSet(self.flavor)
        dup.entries = dict(self.entries)
        return dup

    def max_stamp(self) -> Optional[LamportStamp]:
        stamps = [stamp for stamp, _ in self.entries.values()]
        return max(stamps) if stamps else None

    def stamp_of(self, e: Any) -> Optional[LamportStamp]:
        pair = self.entries.get(e)
        return pair[0] if pair else None

    def _canonical_lines(self) -> list:
        return [
            f"elem {render(e)} stamp={self.entries[e][0].render()}"
            f" visible={render(self.entries[e][1])}"
            for e in sorted_elements(self.entries)
        ]


class CounterSet(SetCrdt):
    """Counting set: membership is a per-element balance of adds minus removes.

    An add moves the balance to exactly 1 and a remove to exactly 0, so each
    op carries the signed delta that achieved this locally.  The state-based
    payload realizes positive deltas as fresh tags in a grow-only positive
    pool and negative deltas in a negative pool; the balance is the size
    difference, which merging by union keeps equal to the op-based counter.
    """

    kind = "c"

    def __init__(self, flavor: str):
        super().__init__(flavor)
        if flavor == "state":
            self.pos: Dict[Any, Set[Tag]] = {}
            self.neg: Dict[Any, Set[Tag]] = {}
        else:
            self.counts: Dict[Any, int] = {}

    def count(self, e: Any) -> int:
        if self.flavor == "state":
            return len(self.pos.get(e, ())) - len(self.neg.get(e, ()))
        return self.counts.get(e, 0)

    def lookup(self) -> Set[Any]:
        if self.flavor == "state":
            keys = set(self.pos) | set(self.neg)
        else:
            keys = set(self.counts)
        return {e for e in keys if self.count(e) > 0}

    def _shift(self, e: Any, delta: int, clock: ReplicaClock) -> None:
        if self.flavor == "op":
            self.counts[e] = self.counts.get(e, 0) + delta
            return
        pool = self.pos if delta > 0 else self.neg
        bucket = pool.setdefault(e, set())
        for _ in range(abs(delta)):
            bucket.add(clock.fresh_tag())

    def local_add(self, e: Any, clock: ReplicaClock) -> SetOp:
        delta = 1 - self.count(e)
        if delta:
            self._shift(e, delta, clock)
        return SetOp(ADD, e, delta=delta)

    def local_rmv(self, e: Any, clock: ReplicaClock) -> SetOp:
        delta = -self.count(e)
        if delta:
            self._shift(e, delta, clock)
        return SetOp(RMV, e, delta=delta)

    def apply(self, op: SetOp) -> None:
        self._require_flavor("op", "apply")
        self.counts[op.element] = self.counts.get(op.element, 0) + op.delta

    def merge(self, other: SetCrdt) -> None:
        self._require_flavor("state", "merge")
        self._check_peer(other)
        for e, tags in other.pos.items():
            self.pos.setdefault(e, set()).update(tags)
        for e, tags in other.neg.items():
            self.neg.setdefault(e, set()).update(tags)

    def copy(self) -> "CounterSet":
        dup = CounterSet(self.flavor)
        if self.flavor == "state":
            dup.pos = {e: set(t) for e, t in self.pos.items()}
            dup.neg = {e: set(t) for e, t in self.neg.items()}
        else:
            dup.counts = dict(self.counts)
        return dup

    def _canonical_lines(self) -> list:
        lines = []
        if self.flavor == "state":
            for e in sorted_elements(set(self.pos) | set(self.neg)):
                pos = render(self.pos.get(e, set()))
                neg = render(self.neg.get(e, set()))
                lines.append(f"elem {render(e)} pos={pos} neg={neg}")
        else:
            for e in sorted_elements(self.counts):
                if self.counts[e]:
                    lines.append(f"elem {render(e)} count={self.counts[e]}")
        return lines


class ObservedRemoveSet(SetCrdt):
    """Tagged set: each add mints a tag, a remove kills only tags it has seen.

    Every tag is paired with a clock reading taken when it was minted, so
    elements can also be ranked by how recently they were last added.
    """

    kind = "or"

    def __init__(self, flavor: str):
        super().__init__(flavor)
        self.tags: Dict[Any, Set[Tag]] = {}
        self.stamps: Dict[Tag, LamportStamp] = {}
        if flavor == "state":
            self.removed: Dict[Any, Set[Tag]] = {}

    def live_tags(self, e: Any) -> Set[Tag]:
        tags = self.tags.get(e, set())
        if self.flavor == "state":
            return tags - self.removed.get(e, set())
        return set(tags)

    def newest_stamp(self, e: Any) -> Optional[LamportStamp]:
        readings = [
            self.stamps[t] for t in self.live_tags(e) if t in self.stamps
        ]
        return max(readings) if readings else None

    def lookup(self) -> Set[Any]:
        return {e for e in self.tags if self.live_tags(e)}

    def local_add(self, e: Any, clock: ReplicaClock) -> SetOp:
        tag = clock.fresh_tag()
        stamp = clock.next_stamp()
        self.tags.setdefault(e, set()).add(tag)
        self.stamps[tag] = stamp
        return SetOp(ADD, e, stamp=stamp, tag=tag)

    def local_rmv(self, e: Any, clock: ReplicaClock) -> SetOp:
        observed = frozenset(self.live_tags(e))
        if self.flavor == "state":
            self.removed.setdefault(e, set()).update(observed)
        else:
            remaining = self.tags.get(e, set()) - observed
            if remaining:
                self.tags[e] = remaining
            else:
                self.tags.pop(e, None)
        return SetOp(RMV, e, tags=observed)

    def apply(self, op: SetOp) -> None:
        self._require_flavor("op", "apply")
        if op.verb == ADD:
            self.tags.setdefault(op.element, set()).add(op.tag)
            if op.stamp is not None:
                self.stamps[op.tag] = op.stamp
        else:
            remaining = self.tags.get(op.element, set()) - op.tags
            if remaining:
                self.tags[op.element] = remaining
            else:
                self.tags.pop(op.element, None)

    def merge(self, other: SetCrdt) -> None:
        self._require_flavor("state", "merge")
        self._check_peer(other)
        for e, tags in other.tags.items():
            self.tags.setdefault(e, set()).update(tags)
        for e, tags in other.removed.items():
            self.removed.setdefault(e, set()).update(tags)
        self.stamps.update(other.stamps)

    def copy(self) -> "ObservedRemoveSet":
        dup = ObservedRemoveSet(self.flavor)
        dup.tags = {e: set(t) for e, t in self.tags.items()}
        dup.stamps = dict(self.stamps)
        if self.flavor == "state":
            dup.removed = {e: set(t) for e, t in self.removed.items()}
        return dup

    def max_stamp(self) -> Optional[LamportStamp]:
        return max(self.stamps.values()) if self.stamps else None

    def _canonical_lines(self) -> list:
        lines = []
        if self.flavor == "state":
            for e in sorted_elements(set(self.tags) | set(self.removed)):
                tags = render(self.tags.get(e, set()))
                removed = render(self.removed.get(e, set()))
                lines.append(f"elem {render(e)} tags={tags} removed={removed}")
        else:
            for e in sorted_elements(self.tags):
                lines.append(f"elem {render(e)} tags={render(self.tags[e])}")
        for tag in sorted(self.stamps, key=lambda t: (t.origin, t.seq)):
            lines.append(f"tag {tag.render()} stamp={self.stamps[tag].render()}")
        return lines


_CLASSES = {
    "g": GSet,
    "2p": TwoPhaseSet,
    "lww": LwwSet,
    "c": CounterSet,
    "or": ObservedRemoveSet,
}


def make_set(kind: str, flavor: str) -> SetCrdt:
    if kind not in _CLASSES:
        raise KindMismatch(f"unknown set kind {kind!r}")
    return _CLASSES[kind](flavor)

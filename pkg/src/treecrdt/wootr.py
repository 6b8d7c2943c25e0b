"""Recursive sequence elements ordered without keeping tombstones.

An element is one of the two sequence ends or a triple of an atom and the
two elements it was inserted between.  Identity is structural, so the same
concurrent insertion on two replicas produces one element, and a removed
element can be reintroduced.  Ordering recovers the place of referenced
but deleted elements by integrating the whole reference closure, shallow
elements first.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Set, Tuple

from .clocks import ReplicaClock
from .errors import IllegalCombo, PreconditionViolation
from .render import render, sort_key
from .sets import SetCrdt, SetOp, make_set

WOOTR_KINDS = ("lww", "c", "or")


class WootrElement:
    """Base for sequence elements: the two ends and atom triples."""


@dataclass(frozen=True)
class WootrBound(WootrElement):
    """One of the two fixed ends of every sequence."""

    side: str

    def render(self) -> str:
        return "^" if self.side == "begin" else "$"

    def canon_key(self):
        return self.side


BEGIN = WootrBound("begin")
END = WootrBound("end")


@dataclass(frozen=True)
class WootrTriple(WootrElement):
    """An atom placed between two other elements."""

    atom: Any
    prev: WootrElement
    next: WootrElement

    def render(self) -> str:
        return f"<{render(self.atom)}.{render(self.prev)}.{render(self.next)}>"

    def canon_key(self):
        return self.render()


def wootr_depth(e: WootrElement, memo: Dict[WootrElement, int]) -> int:
    """Nesting depth; references always point at shallower elements."""
    if not isinstance(e, WootrTriple):
        return 0
    if e not in memo:
        memo[e] = 1 + max(wootr_depth(e.prev, memo), wootr_depth(e.next, memo))
    return memo[e]


def wootr_closure(elements: Iterable[WootrElement]) -> Set[WootrTriple]:
    """Every triple reachable through prev/next references."""
    seen: Set[WootrTriple] = set()
    stack = [e for e in elements if isinstance(e, WootrTriple)]
    while stack:
        e = stack.pop()
        if e in seen:
            continue
        seen.add(e)
        for ref in (e.prev, e.next):
            if isinstance(ref, WootrTriple) and ref not in seen:
                stack.append(ref)
    return seen


def _hint(e: WootrTriple) -> Tuple:
    # concurrent elements between the same neighbours order by their atom
    # first; the structural encoding settles equal atoms
    return (sort_key(e.atom), e.render())


def _integrate(seq: List[WootrElement], e: WootrTriple, lpos: int, rpos: int) -> None:
    """Place e inside the open window (lpos, rpos) of the sequence."""
    while True:
        if rpos - lpos == 1:
            seq.insert(rpos, e)
            return
        index = {x: i for i, x in enumerate(seq)}
        # narrow the window using only elements whose own references span it
        walls = [lpos]
        for i in range(lpos + 1, rpos):
            x = seq[i]
            if index[x.prev] <= lpos and index[x.next] >= rpos:
                walls.append(i)
        walls.append(rpos)
        k = 1
        while k < len(walls) - 1 and _hint(seq[walls[k]]) < _hint(e):
            k += 1
        lpos, rpos = walls[k - 1], walls[k]


def wootr_order(elements: Iterable[WootrElement]) -> List[WootrTriple]:
    """The given live triples in sequence order.

    Integrates the whole reference closure shallow-first, so the place of
    a deleted previous or next element is recovered before it is needed,
    then filters the result back down to the live elements.
    """
    live = {e for e in elements if isinstance(e, WootrTriple)}
    depths: Dict[WootrElement, int] = {}
    universe = sorted(
        wootr_closure(live), key=lambda t: (wootr_depth(t, depths), t.render())
    )
    seq: List[WootrElement] = [BEGIN, END]
    for e in universe:
        _integrate(seq, e, seq.index(e.prev), seq.index(e.next))
    return [e for e in seq[1:-1] if e in live]


class WootrSequence:
    """A collaborative sequence: a set CRDT of elements plus their order."""

    def __init__(self, kind: str, flavor: str):
        if kind not in WOOTR_KINDS:
            raise IllegalCombo(
                f"sequence elements need concurrent add/remove resolution,"
                f" which set kind {kind!r} does not provide"
            )
        self.kind = kind
        self.flavor = flavor
        self.elements: SetCrdt = make_set(kind, flavor)

    def order(self) -> List[WootrTriple]:
        return wootr_order(self.elements.lookup())

    def line(self) -> List[WootrElement]:
        """The current sequence with its two ends, for picking neighbours."""
        return [BEGIN, *self.order(), END]

    def text(self) -> str:
        return "".join(render(e.atom) for e in self.order())

    def gen_insert(
        self, atom: Any, prev: WootrElement, nxt: WootrElement, clock: ReplicaClock
    ) -> SetOp:
        line = self.line()
        if prev not in line or nxt not in line or line.index(prev) >= line.index(nxt):
            raise PreconditionViolation(
                "prev must precede next in the current sequence"
            )
        return self.elements.gen_add(WootrTriple(atom, prev, nxt), clock)

    def gen_insert_at(self, atom: Any, index: int, clock: ReplicaClock) -> SetOp:
        """Insert so the atom lands at `index` in the current text."""
        line = self.line()
        if not 0 <= index <= len(line) - 2:
            raise PreconditionViolation(f"index {index} is outside the sequence")
        return self.gen_insert(atom, line[index], line[index + 1], clock)

    def gen_remove(self, e: WootrTriple, clock: ReplicaClock) -> SetOp:
        return self.elements.gen_rmv(e, clock)

    def apply(self, op: SetOp) -> None:
        self.elements.apply(op)

    def merge(self, other: "WootrSequence") -> None:
        self.elements.merge(other.elements)

    def copy(self) -> "WootrSequence":
        dup = WootrSequence(self.kind, self.flavor)
        dup.elements = self.elements.copy()
        return dup

    def canonical(self) -> str:
        return self.elements.canonical()

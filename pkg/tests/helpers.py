"""Shared test utilities: miniature replica groups and brute-force oracles."""

from __future__ import annotations

import random
from typing import Any, Dict, List, Optional, Tuple

from treecrdt.clocks import ReplicaClock
from treecrdt.errors import PreconditionViolation
from treecrdt.harness import oracle_membership
from treecrdt.render import sort_key
from treecrdt.sets import ADD, RMV, SetOp, make_set
from treecrdt.wootr import BEGIN, END

REPLICAS = ("r1", "r2", "r3")


class SetGroup:
    """Replicas running one set kind in one flavor, synced only at sync points."""

    def __init__(self, kind: str, flavor: str, replicas=REPLICAS, seed: int = 0):
        self.kind = kind
        self.flavor = flavor
        self.states = {r: make_set(kind, flavor) for r in replicas}
        self.clocks = {r: ReplicaClock(r, seed=seed) for r in replicas}
        self.log: List[Tuple[str, SetOp]] = []
        self.applied = {r: 0 for r in replicas}

    def local(self, replica: str, verb: str, e: Any) -> Optional[SetOp]:
        state = self.states[replica]
        try:
            if verb == ADD:
                op = state.gen_add(e, self.clocks[replica])
            else:
                op = state.gen_rmv(e, self.clocks[replica])
        except PreconditionViolation:
            return None
        self.log.append((replica, op))
        return op

    def sync(self) -> None:
        if self.flavor == "op":
            for r, state in self.states.items():
                for origin, op in self.log[self.applied[r]:]:
                    if origin != r:
                        state.apply(op)
                        if op.stamp is not None:
                            self.clocks[r].observe(op.stamp)
                self.applied[r] = len(self.log)
        else:
            for _ in range(2):
                for r in self.states:
                    for other in self.states:
                        if other != r:
                            self.states[r].merge(self.states[other])
            for r, state in self.states.items():
                stamp = state.max_stamp()
                if stamp is not None:
                    self.clocks[r].observe(stamp)

    def lookups(self) -> Dict[str, set]:
        return {r: state.lookup() for r, state in self.states.items()}


def run_set_history(kind: str, flavor: str, script, final_sync: bool = True) -> SetGroup:
    """Script steps: ("sync",) or (replica, verb, element)."""
    group = SetGroup(kind, flavor)
    for step in script:
        if step[0] == "sync":
            group.sync()
        else:
            replica, verb, e = step
            group.local(replica, verb, e)
    if final_sync:
        group.sync()
    return group


def random_set_script(seed: int, n_steps: int = 12, elements="abc"):
    """A deterministic mixed script of local ops and sync points."""
    rng = random.Random(seed)
    script = []
    for _ in range(n_steps):
        if rng.random() < 0.2:
            script.append(("sync",))
        else:
            replica = rng.choice(REPLICAS)
            verb = ADD if rng.random() < 0.6 else RMV
            script.append((replica, verb, rng.choice(elements)))
    return script


def oracle_membership_ops(kind: str, ops: List[SetOp], e: Any) -> bool:
    """Decide membership of e from the op history alone, one rule per kind."""
    return oracle_membership(kind, ops, e)


class TreeGroup:
    """Replicas running one tree type, synced only at sync points."""

    def __init__(self, factory, replicas=REPLICAS, seed: int = 0):
        self.trees = {r: factory() for r in replicas}
        self.flavor = next(iter(self.trees.values())).flavor
        self.clocks = {r: ReplicaClock(r, seed=seed) for r in replicas}
        self.log: List[Tuple[str, Any]] = []
        self.applied = {r: 0 for r in replicas}

    def add(self, replica: str, *args):
        return self._gen(replica, ADD, args)

    def rmv(self, replica: str, *args):
        return self._gen(replica, RMV, args)

    def _gen(self, replica: str, verb: str, args):
        tree = self.trees[replica]
        try:
            if verb == ADD:
                op = tree.gen_add(*args, self.clocks[replica])
            else:
                op = tree.gen_rmv(*args, self.clocks[replica])
        except PreconditionViolation:
            return None
        self.log.append((replica, op))
        return op

    def sync(self) -> None:
        if self.flavor == "op":
            for r, tree in self.trees.items():
                for origin, op in self.log[self.applied[r]:]:
                    if origin != r:
                        tree.apply_remote(op)
                        stamp = op.max_stamp()
                        if stamp is not None:
                            self.clocks[r].observe(stamp)
                self.applied[r] = len(self.log)
        else:
            for _ in range(2):
                for r in self.trees:
                    for other in self.trees:
                        if other != r:
                            self.trees[r].merge(self.trees[other], self.clocks[r])

    def dumps(self) -> Dict[str, str]:
        return {r: tree.lookup().dump() for r, tree in self.trees.items()}


class TombstoneSequence:
    """Delivery-order sequence integrator that keeps every element forever.

    An independent check for the recompute-from-the-set ordering: integrate
    each insert when it arrives and never drop removed elements, then read
    the visible text off the retained line.
    """

    def __init__(self):
        self.line: List[Any] = [BEGIN, END]

    def deliver(self, w) -> None:
        if w not in self.line:
            self._ins(w, self.line.index(w.prev), self.line.index(w.next))

    def _ins(self, w, l: int, r: int) -> None:
        inside = self.line[l + 1 : r]
        if not inside:
            self.line.insert(r, w)
            return
        at = {e: i for i, e in enumerate(self.line)}
        walls = [self.line[l]]
        walls += [d for d in inside if at[d.prev] <= l and at[d.next] >= r]
        walls.append(self.line[r])

        def key(d):
            return (sort_key(d.atom), d.render())

        i = 1
        while i < len(walls) - 1 and key(walls[i]) < key(w):
            i += 1
        self._ins(w, self.line.index(walls[i - 1]), self.line.index(walls[i]))

    def order(self, live) -> List[Any]:
        keep = set(live)
        return [e for e in self.line[1:-1] if e in keep]

"""Tree CRDTs stored as one replicated set of root paths.

A node's identity is its full path from the root, so the same atom may
label children of different parents.  The visible tree is the live path
set repaired into a prefix-closed set by a connection policy; for the two
monotonic policies the repair can also be maintained in place from
membership deltas instead of recomputed from scratch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Set, Tuple

from .clocks import LamportStamp, ReplicaClock
from .errors import IllegalCombo, PreconditionViolation
from .graph import TreeOp
from .lookup import LookupTree
from .policies import CONNECT_POLICIES
from .render import Path, render
from .sets import ADD, RMV, make_set

EPSILON = Path()

INCREMENTAL_PATH_POLICIES = ("skip", "reappear")


def parse_path(text: str) -> Path:
    """Read a /-joined path literal; "/" or the empty string is the root."""
    atoms = [a for a in text.strip().split("/") if a]
    for atom in atoms:
        check_atom(atom)
    return Path(atoms)


def check_atom(atom: Any) -> None:
    if not isinstance(atom, str) or not atom or "/" in atom or atom != atom.strip():
        raise ValueError(f"atom must be a bare identifier, got {atom!r}")


def is_prefix_closed(paths: Iterable[Path]) -> bool:
    got = {Path(p) for p in paths} | {EPSILON}
    return all(Path(p[:-1]) in got for p in got if p)


@dataclass
class ProbeCounter:
    """Counts membership probes so lookup cost can be asserted, not timed."""

    probes: int = 0


def path_images(
    paths: Iterable[Path],
    policy: str,
    probes: Optional[ProbeCounter] = None,
) -> Dict[Path, Optional[Path]]:
    """Map each live path to where the policy shows it; None when dropped.

    A path is an orphan when some proper prefix of it is not live.  Skip
    drops orphans, reappear keeps them in place, root keeps only the run of
    atoms after the last dead prefix, and compact hangs that run below the
    image of the longest live prefix before it.  Shorter paths are resolved
    first, so a compact image can reuse the already-computed image of its
    live prefix.
    """
    if policy not in CONNECT_POLICIES:
        raise IllegalCombo(f"unknown connection policy {policy!r}")
    live = {Path(p) for p in paths} | {EPSILON}
    counter = probes if probes is not None else ProbeCounter()

    def is_live(p: Path) -> bool:
        counter.probes += 1
        return p in live

    out: Dict[Path, Optional[Path]] = {}
    for p in sorted(live, key=Path.order_key):
        dead = {k for k in range(len(p)) if not is_live(Path(p[:k]))}
        if not dead:
            out[p] = p
        elif policy == "skip":
            out[p] = None
        elif policy == "reappear":
            out[p] = p
        elif policy == "root":
            out[p] = Path(p[max(dead):])
        else:
            j = max(dead)
            m = max(k for k in range(j) if k not in dead)
            out[p] = Path(out[Path(p[:m])] + p[j:])
    return out


def connect_paths(
    paths: Iterable[Path],
    policy: str,
    probes: Optional[ProbeCounter] = None,
) -> Set[Path]:
    """Repair a live path set into a prefix-closed set under one policy."""
    images = path_images(paths, policy, probes)
    out = {img for img in images.values() if img is not None}
    if policy == "reappear":
        for p in images:
            out.update(p.prefixes())
    out.add(EPSILON)
    return out


class WordTree:
    """Replicated tree over a single set CRDT of root paths."""

    repr_name = "word"

    def __init__(self, kind: str, flavor: str, connect_policy: str = "skip"):
        if connect_policy not in CONNECT_POLICIES:
            raise IllegalCombo(f"unknown connection policy {connect_policy!r}")
        self.kind = kind
        self.flavor = flavor
        self.connect_policy = connect_policy
        self.paths = make_set(kind, flavor)

    # --- lookup pipeline ---

    def live_paths(self) -> Set[Path]:
        return {Path(p) for p in self.paths.lookup()}

    def lookup(self) -> LookupTree:
        live = self.live_paths()
        images = path_images(live, self.connect_policy)
        lt = LookupTree(root_label="/")
        if self.connect_policy == "reappear":
            ghosts = {q for p in images for q in p.prefixes() if q and q not in live}
            shown = {img for img in images.values() if img} | ghosts
            for p in sorted(shown, key=Path.order_key):
                lt.add_instance(p, p, Path(p[:-1]), label=render(p[-1]), ghost=p in ghosts)
            return lt
        # each instance remembers the first live path it shows, so moves of
        # a relocated subtree stay observable across lookups
        sources: Dict[Path, Path] = {}
        for src in sorted(images, key=Path.order_key):
            img = images[src]
            if img:
                sources.setdefault(img, src)
        for img in sorted(sources, key=Path.order_key):
            lt.add_instance(img, sources[img], Path(img[:-1]), label=render(img[-1]))
        return lt

    # --- generation ---

    def gen_add(self, atom: str, parent: Any, clock: ReplicaClock) -> TreeOp:
        check_atom(atom)
        p = Path(parent)
        lt = self.lookup()
        if p != EPSILON and p not in lt.instances:
            raise PreconditionViolation(f"{p.render()} is not in the tree")
        pn = p.child(atom)
        inst = lt.instances.get(pn)
        # a ghost only displays a dead path, so adding there regrows it
        if inst is not None and not inst.ghost:
            raise PreconditionViolation(f"{pn.render()} is already in the tree")
        op = self.paths.local_add(pn, clock)
        return TreeOp(ADD, pn, p, (op,))

    def gen_rmv(self, target: Any, clock: ReplicaClock) -> TreeOp:
        if self.kind == "g":
            raise PreconditionViolation("grow-only trees cannot remove")
        p = Path(target)
        if p == EPSILON:
            raise PreconditionViolation("the root path is always present")
        lt = self.lookup()
        if p not in lt.instances:
            raise PreconditionViolation(f"{p.render()} is not in the tree")
        doomed = self._doomed_paths(lt, p)
        ops = tuple(self.paths.local_rmv(q, clock) for q in doomed)
        return TreeOp(RMV, p, None, ops)

    def _doomed_paths(self, lt: LookupTree, p: Path) -> List[Path]:
        """The set elements behind every shown path extending p."""
        if self.connect_policy in INCREMENTAL_PATH_POLICIES:
            doomed = {Path(key) for key in lt.instances if Path(key).starts_with(p)}
        else:
            images = path_images(self.live_paths(), self.connect_policy)
            doomed = {
                src
                for src, img in images.items()
                if img is not None and img.starts_with(p)
            }
        return sorted(doomed, key=Path.order_key)

    # --- synchronization ---

    def apply_remote(self, op: TreeOp) -> None:
        for sub in op.node_ops:
            self.paths.apply(sub)

    def merge(self, other: "WordTree", clock: Optional[ReplicaClock] = None) -> None:
        self.paths.merge(other.paths)
        if clock is not None:
            stamp = other.max_stamp()
            if stamp is not None:
                clock.observe(stamp)

    def max_stamp(self) -> Optional[LamportStamp]:
        return self.paths.max_stamp()

    def copy(self) -> "WordTree":
        dup = WordTree(self.kind, self.flavor, self.connect_policy)
        dup.paths = self.paths.copy()
        return dup

    def canonical(self) -> str:
        lines = [
            f"tree repr={self.repr_name} kind={self.kind} flavor={self.flavor}"
            f" connect={self.connect_policy}"
        ]
        lines += ["paths " + ln for ln in self.paths.canonical().splitlines()]
        return "\n".join(lines)


class IncrementalWordTree(WordTree):
    """Word tree that repairs its cached lookup from membership deltas.

    Only the monotonic policies can be maintained in place.  Skip drops an
    orphan until a prefix revives it; reappear keeps recreated ancestors as
    ghost instances, unmarked when their path is re-added and pruned when
    their last live descendant goes.  Membership deltas are read off the
    payload around each change; the cached tree is repaired from just those
    flipped paths.
    """

    def __init__(
        self,
        kind: str,
        flavor: str,
        connect_policy: str = "skip",
        prefix_rmv: Optional[bool] = None,
    ):
        if connect_policy not in INCREMENTAL_PATH_POLICIES:
            raise IllegalCombo(
                f"policy {connect_policy!r} moves orphans when ancestors return"
                " and cannot be maintained in place"
            )
        super().__init__(kind, flavor, connect_policy)
        add_once_skip = kind == "2p" and flavor == "op" and connect_policy == "skip"
        if prefix_rmv is None:
            prefix_rmv = add_once_skip
        elif prefix_rmv and not add_once_skip:
            raise IllegalCombo(
                "prefix-only removal needs add-once payloads, op delivery,"
                " and the skip policy"
            )
        self.prefix_rmv = prefix_rmv
        self.cached = LookupTree(root_label="/")
        # live extensions of each prefix, kept for orphan reattachment
        self.live_ext: Dict[Tuple, Set[Path]] = {}

    def lookup(self) -> LookupTree:
        return self.cached

    def batch_lookup(self) -> LookupTree:
        """Recompute the tree from the raw payload, bypassing the cache."""
        return WordTree.lookup(self)

    # --- synchronization ---

    def gen_add(self, atom: str, parent: Any, clock: ReplicaClock) -> TreeOp:
        return self._mutate(lambda: WordTree.gen_add(self, atom, parent, clock))

    def gen_rmv(self, target: Any, clock: ReplicaClock) -> TreeOp:
        if not self.prefix_rmv:
            return self._mutate(lambda: WordTree.gen_rmv(self, target, clock))
        p = Path(target)
        if p == EPSILON:
            raise PreconditionViolation("the root path is always present")
        if p not in self.cached.instances:
            raise PreconditionViolation(f"{p.render()} is not in the tree")
        self._expand_rmv(p, clock)
        # constant-size payload: each receiver expands the subtree itself
        return TreeOp(RMV, p)

    def apply_remote(self, op: TreeOp) -> None:
        if op.verb == RMV and not op.node_ops:
            self._expand_rmv(Path(op.node), None)
            return
        self._mutate(lambda: WordTree.apply_remote(self, op))

    def merge(self, other: "WordTree", clock: Optional[ReplicaClock] = None) -> None:
        self._mutate(lambda: WordTree.merge(self, other, clock))

    def copy(self) -> "IncrementalWordTree":
        dup = IncrementalWordTree(
            self.kind, self.flavor, self.connect_policy, self.prefix_rmv
        )
        dup.paths = self.paths.copy()
        for inst in self.cached.instances.values():
            dup.cached.add_instance(
                inst.key, inst.node, inst.parent, label=inst.label, ghost=inst.ghost
            )
        dup.live_ext = {k: set(v) for k, v in self.live_ext.items()}
        return dup

    def _expand_rmv(self, p: Path, clock: Optional[ReplicaClock]) -> None:
        def act():
            doomed = [q for q in self.live_paths() if q.starts_with(p)]
            for q in sorted(doomed, key=Path.order_key):
                self.paths.local_rmv(q, clock)

        self._mutate(act)

    # --- cache repair ---

    def _mutate(self, action):
        before = self.live_paths()
        result = action()
        after = self.live_paths()
        self._repair(before, after)
        return result

    def _repair(self, before: Set[Path], after: Set[Path]) -> None:
        gone = sorted(before - after, key=Path.order_key)
        came = sorted(after - before, key=Path.order_key)
        for p in gone:
            bucket = self.live_ext.get(p[:-1])
            if bucket:
                bucket.discard(p)
                if not bucket:
                    del self.live_ext[p[:-1]]
        for p in came:
            self.live_ext.setdefault(p[:-1], set()).add(p)
        if self.connect_policy == "skip":
            for p in gone:
                self._skip_dead(p)
            for p in came:
                self._skip_live(p)
        else:
            for p in gone:
                self._reappear_dead(p)
            for p in came:
                self._reappear_live(p)

    def _skip_dead(self, p: Path) -> None:
        if p not in self.cached.instances:
            return
        stack = [tuple(p)]
        while stack:
            key = stack.pop()
            stack.extend(child.key for child in self.cached.children(key))
            self.cached.remove_instance(key)

    def _skip_live(self, p: Path) -> None:
        if p in self.cached.instances:
            return
        if p[:-1] != () and p[:-1] not in self.cached.instances:
            return  # orphan: stays dropped until a prefix revives
        stack = [p]
        while stack:
            q = stack.pop()
            if q in self.cached.instances:
                continue
            self.cached.add_instance(q, q, Path(q[:-1]), label=render(q[-1]))
            stack.extend(self.live_ext.get(tuple(q), ()))

    def _reappear_live(self, p: Path) -> None:
        inst = self.cached.instances.get(p)
        if inst is not None:
            inst.ghost = False
            return
        for q in p.prefixes():
            if q and q not in self.cached.instances:
                self.cached.add_instance(
                    q, q, Path(q[:-1]), label=render(q[-1]), ghost=True
                )
        self.cached.add_instance(p, p, Path(p[:-1]), label=render(p[-1]))

    def _reappear_dead(self, p: Path) -> None:
        if self._live_below(tuple(p)):
            self.cached.instances[p].ghost = True
            return
        self.cached.remove_instance(p)
        self._prune_ghosts(tuple(p[:-1]))

    def _live_below(self, key: Tuple) -> bool:
        stack = [child.key for child in self.cached.children(key)]
        while stack:
            k = stack.pop()
            if not self.cached.instances[k].ghost:
                return True
            stack.extend(child.key for child in self.cached.children(k))
        return False

    def _prune_ghosts(self, key: Tuple) -> None:
        # a ghost with no live descendant left has no reason to stay
        while key != ():
            inst = self.cached.instances.get(key)
            if inst is None or not inst.ghost or self._live_below(key):
                return
            self.cached.remove_instance(key)
            key = key[:-1]

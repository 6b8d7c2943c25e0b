"""Deterministic multi-replica simulator and exhaustive convergence checker."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, Iterable, List, Optional, Set, Tuple

from .clocks import DeliveryBuffer, Envelope, ReplicaClock
from .edges import EdgeTree
from .errors import (
    IllegalCombo,
    PreconditionViolation,
    ScenarioError,
    SeveralBlowup,
)
from .graph import GraphTree, TreeOp
from .lookup import LookupTree
from .ordered import (
    EdgePositionedEdgeTree,
    EdgePositionedGraphTree,
    EdgePositionedWordTree,
    NodePositionedTree,
    PositionedNode,
    WootrEdgeTree,
    WootrGraphTree,
    WootrWordTree,
)
from .paths import EPSILON, WordTree
from .policies import CONNECT_POLICIES, MAP_POLICIES
from .render import Path, render, sort_key
from .sets import ADD, FLAVORS, KINDS, RMV, SetOp

REPRS = ("graph", "edge", "word")
PI_MODES = (None, "node", "edge", "wootr")

MONOTONE_CONNECT = ("skip", "reappear")
MONOTONE_MAP = ("several", "zero")


# --- combos ---


@dataclass(frozen=True)
class ComboSpec:
    """One point in the design space: representation, kind, flavor, policies."""

    repr_name: str
    kind: str
    flavor: str
    connect_policy: str = "skip"
    map_policy: Optional[str] = "shortest"
    pi_mode: Optional[str] = None

    def label(self) -> str:
        return " ".join(
            (
                self.repr_name,
                self.kind,
                self.flavor,
                self.connect_policy,
                self.map_policy or "-",
                self.pi_mode or "plain",
            )
        )

    def is_monotone(self) -> bool:
        """True when the lookup may only grow in place, never rewire."""
        if self.connect_policy not in MONOTONE_CONNECT:
            return False
        if self.repr_name == "word":
            return True
        return self.map_policy in MONOTONE_MAP


def parse_combo(tokens: List[str]) -> ComboSpec:
    if len(tokens) != 6:
        raise ScenarioError(
            "combo needs 6 fields: repr kind flavor connect map pi"
        )
    repr_name, kind, flavor, connect, mp, pi = tokens
    return ComboSpec(
        repr_name=repr_name,
        kind=kind,
        flavor=flavor,
        connect_policy=connect,
        map_policy=None if mp == "-" else mp,
        pi_mode=None if pi == "plain" else pi,
    )


def make_tree(combo: ComboSpec) -> Any:
    """Build the tree a combo describes, or raise IllegalCombo."""
    if combo.repr_name not in REPRS:
        raise IllegalCombo(f"unknown representation {combo.repr_name!r}")
    if combo.kind not in KINDS:
        raise IllegalCombo(f"unknown set kind {combo.kind!r}")
    if combo.flavor not in FLAVORS:
        raise IllegalCombo(f"unknown flavor {combo.flavor!r}")
    if combo.pi_mode not in PI_MODES:
        raise IllegalCombo(f"unknown positioning mode {combo.pi_mode!r}")
    r, k, f = combo.repr_name, combo.kind, combo.flavor
    cp, mp, pi = combo.connect_policy, combo.map_policy, combo.pi_mode
    if r == "word":
        if mp is not None:
            raise IllegalCombo("word trees have no mapping stage")
        if pi is None:
            return WordTree(k, f, cp)
        if pi == "edge":
            if k != "2p":
                raise IllegalCombo("positioned path steps are add-once, so 2p")
            return EdgePositionedWordTree(f, cp)
        if pi == "wootr":
            return WootrWordTree(k, f, cp)
        raise IllegalCombo("word trees take positions on steps, not nodes")
    if mp is None:
        raise IllegalCombo(f"{r} trees need a mapping policy")
    if pi is None:
        cls = GraphTree if r == "graph" else EdgeTree
        return cls(k, f, cp, mp)
    if pi == "node":
        if r != "graph":
            raise IllegalCombo("node positions pair with the graph representation")
        if k != "2p":
            raise IllegalCombo("positioned nodes are add-once, so 2p")
        return NodePositionedTree(f, cp, mp)
    if pi == "edge":
        if r == "graph":
            return EdgePositionedGraphTree(k, f, cp, mp)
        if k != "2p":
            raise IllegalCombo("positioned edges are add-once, so 2p")
        return EdgePositionedEdgeTree(f, cp, mp)
    cls = WootrGraphTree if r == "graph" else WootrEdgeTree
    return cls(k, f, cp, mp)


def legal_combos() -> List[ComboSpec]:
    """Every combination of choices that builds, in a stable order."""
    out = []
    for repr_name in REPRS:
        maps: Tuple[Optional[str], ...] = (
            (None,) if repr_name == "word" else MAP_POLICIES
        )
        for kind in KINDS:
            for flavor in FLAVORS:
                for connect in CONNECT_POLICIES:
                    for mp in maps:
                        for pi in PI_MODES:
                            combo = ComboSpec(repr_name, kind, flavor, connect, mp, pi)
                            try:
                                make_tree(combo)
                            except IllegalCombo:
                                continue
                            out.append(combo)
    return out


# --- scenarios ---


@dataclass
class Scenario:
    """A replayable script: same combo, seed, and actions give one transcript."""

    combo: ComboSpec
    replicas: int = 3
    seed: int = 42
    script: List[Tuple[str, ...]] = field(default_factory=list)


def parse_scenario(text: str) -> Scenario:
    combo: Optional[ComboSpec] = None
    replicas = 3
    seed = 42
    script: List[Tuple[str, ...]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        head = tokens[0]
        try:
            if head == "combo":
                combo = parse_combo(tokens[1:])
            elif head == "replicas":
                replicas = int(tokens[1])
            elif head == "seed":
                seed = int(tokens[1])
            elif head == "sync" and len(tokens) == 1:
                script.append(("sync",))
            else:
                verb = tokens[1] if len(tokens) > 1 else ""
                if verb == "sync":
                    script.append(("sync",))
                elif verb in ("add", "rmv", "insert", "deliver", "merge"):
                    script.append(tuple(tokens))
                else:
                    raise ScenarioError(f"unknown action {line!r}")
        except (IndexError, ValueError) as exc:
            raise ScenarioError(f"line {lineno}: {raw.strip()!r}: {exc}") from exc
        except ScenarioError as exc:
            raise ScenarioError(f"line {lineno}: {exc}") from exc
    if combo is None:
        raise ScenarioError("scenario is missing a combo line")
    return Scenario(combo=combo, replicas=replicas, seed=seed, script=script)


def serialize_scenario(s: Scenario) -> str:
    lines = [f"combo {s.combo.label()}", f"replicas {s.replicas}", f"seed {s.seed}"]
    for action in s.script:
        lines.append("sync" if action[0] == "sync" else " ".join(action))
    return "\n".join(lines) + "\n"


# --- simulation ---


@dataclass
class SimReplica:
    rid: str
    tree: Any
    clock: ReplicaClock
    buffer: DeliveryBuffer = field(default_factory=DeliveryBuffer)


@dataclass
class StepRecord:
    index: int
    action: Tuple[str, ...]
    violation: Optional[str] = None
    dumps: List[Tuple[str, str]] = field(default_factory=list)


class Simulation:
    """Replicas of one combo driven by scenario actions, fully deterministic."""

    def __init__(
        self,
        combo: ComboSpec,
        replicas: int = 3,
        seed: int = 42,
        factory: Optional[Callable[[ComboSpec], Any]] = None,
    ):
        self.combo = combo
        self.factory = factory or make_tree
        self.rids = [f"r{i}" for i in range(1, replicas + 1)]
        self.replicas = {
            rid: SimReplica(rid, self.factory(combo), ReplicaClock(rid, seed))
            for rid in self.rids
        }
        self.envelopes: List[Envelope] = []
        self.local_ops: List[Tuple[str, TreeOp]] = []
        self.handed: Dict[Tuple[str, str], int] = {}
        self.steps = 0

    # --- name resolution ---

    def _resolve_node(self, tree: Any, name: str) -> Any:
        if name == "root":
            return tree.root
        if self.combo.pi_mode == "node":
            pairs = sorted(
                (
                    v
                    for v in tree.lookup().nodes_present()
                    if isinstance(v, PositionedNode) and v.element == name
                ),
                key=sort_key,
            )
            if not pairs:
                raise PreconditionViolation(f"{name} is not in the tree")
            return pairs[0]
        return name

    def _resolve_path(self, tree: Any, text: str) -> Path:
        atoms = [a for a in text.split("/") if a]
        lt = tree.lookup()
        key: Tuple = ()
        for atom in atoms:
            match = next(
                (k for k in lt.children(key) if k.label == atom), None
            )
            if match is None:
                raise PreconditionViolation(f"{text} is not in the tree")
            key = match.key
        return Path(key)

    def _tail_index(self, tree: Any, parent: Any) -> int:
        if self.combo.repr_name == "word":
            return len([q for q in tree.live_paths() if q[:-1] == parent])
        if self.combo.pi_mode == "node":
            return len(tree._child_upis(parent))
        return len([e for e in tree.edges.lookup() if e[0] == parent])

    # --- actions ---

    def local(self, rid: str, verb: str, args: Tuple[str, ...]):
        rep = self.replicas[rid]
        op = self._gen(rep, verb, args)
        self.local_ops.append((rid, op))
        if self.combo.flavor == "op":
            self.envelopes.append(rep.clock.wrap(op))
        return op

    def _gen(self, rep: SimReplica, verb: str, args: Tuple[str, ...]) -> TreeOp:
        tree, clock = rep.tree, rep.clock
        pi = self.combo.pi_mode
        if self.combo.repr_name == "word":
            if verb == "add":
                atom, parent = args
                p = self._resolve_path(tree, parent)
                if pi == "edge":
                    return tree.gen_insert(atom, p, self._tail_index(tree, p), clock)
                return tree.gen_add(atom, p, clock)
            if verb == "insert":
                atom, parent, idx = args
                if pi is None:
                    raise PreconditionViolation("insert needs a positioned tree")
                p = self._resolve_path(tree, parent)
                return tree.gen_insert(atom, p, int(idx), clock)
            if verb == "rmv":
                (target,) = args
                return tree.gen_rmv(self._resolve_path(tree, target), clock)
            raise ScenarioError(f"unknown action {verb!r}")
        if verb == "add":
            n, m = args
            parent = self._resolve_node(tree, m)
            if pi in ("node", "edge"):
                return tree.gen_insert(n, parent, self._tail_index(tree, parent), clock)
            return tree.gen_add(n, parent, clock)
        if verb == "insert":
            n, m, idx = args
            if pi is None:
                raise PreconditionViolation("insert needs a positioned tree")
            return tree.gen_insert(n, self._resolve_node(tree, m), int(idx), clock)
        if verb == "rmv":
            (n,) = args
            return tree.gen_rmv(self._resolve_node(tree, n), clock)
        raise ScenarioError(f"unknown action {verb!r}")

    def deliver_from(self, rid: str, src: str) -> int:
        if self.combo.flavor != "op":
            raise PreconditionViolation("deliver needs the op flavor")
        if src == rid:
            return 0
        rep = self.replicas[rid]
        start = self.handed.get((rid, src), 0)
        outgoing = [e for e in self.envelopes if e.origin == src]
        for env in outgoing[start:]:
            rep.buffer.add(env)
        self.handed[(rid, src)] = len(outgoing)
        applied = 0
        for env in rep.buffer.drain(rep.clock.delivered):
            rep.tree.apply_remote(env.payload)
            rep.clock.accept(env)
            applied += 1
        return applied

    def merge_with(self, rid: str, src: str) -> None:
        if self.combo.flavor != "state":
            raise PreconditionViolation("merge needs the state flavor")
        rep = self.replicas[rid]
        rep.tree.merge(self.replicas[src].tree, rep.clock)

    def sync_all(self) -> None:
        if self.combo.flavor == "op":
            for _ in range(len(self.rids)):
                for rid in self.rids:
                    for src in self.rids:
                        if src != rid:
                            self.deliver_from(rid, src)
            for rid in self.rids:
                if self.replicas[rid].buffer.pending:
                    raise AssertionError("undeliverable envelopes after sync")
        else:
            for _ in range(2):
                for rid in self.rids:
                    for src in self.rids:
                        if src != rid:
                            self.merge_with(rid, src)

    def execute(self, action: Tuple[str, ...]) -> StepRecord:
        self.steps += 1
        record = StepRecord(index=self.steps, action=action)
        touched: List[str] = []
        try:
            if action[0] == "sync":
                self.sync_all()
                touched = list(self.rids)
            else:
                rid, verb = action[0], action[1]
                if rid not in self.replicas:
                    raise ScenarioError(f"unknown replica {rid!r}")
                if verb == "deliver":
                    self.deliver_from(rid, action[2])
                elif verb == "merge":
                    self.merge_with(rid, action[2])
                else:
                    self.local(rid, verb, tuple(action[2:]))
                touched = [rid]
        except PreconditionViolation as exc:
            record.violation = str(exc)
            return record
        for rid in touched:
            try:
                dump = self.replicas[rid].tree.lookup().dump()
            except SeveralBlowup as exc:
                dump = f"blowup: {exc}"
            record.dumps.append((rid, dump))
        return record

    def run(self, script: Iterable[Tuple[str, ...]]) -> List[StepRecord]:
        return [self.execute(tuple(action)) for action in script]

    def final_dumps(self) -> Dict[str, str]:
        return {rid: rep.tree.lookup().dump() for rid, rep in self.replicas.items()}


def run_scenario(combo: ComboSpec, s: Scenario) -> str:
    """Execute a scenario and return its line-oriented transcript."""
    make_tree(combo)
    sim = Simulation(combo, s.replicas, s.seed)
    lines = [f"combo {combo.label()}", f"replicas {s.replicas} seed {s.seed}"]
    for record in sim.run(s.script):
        head = f"step {record.index} "
        if record.action[0] == "sync":
            head += "sync"
        else:
            head += f"replica {record.action[0]} " + " ".join(record.action[1:])
        lines.append(head)
        if record.violation is not None:
            lines.append(f"  violation: {record.violation}")
        elif record.action[0] == "sync":
            for rid, dump in record.dumps:
                lines.append(f"  replica {rid}")
                lines.extend("    " + ln for ln in dump.splitlines())
        else:
            for _, dump in record.dumps:
                lines.extend("  " + ln for ln in dump.splitlines())
    lines.append("final")
    for rid in sim.rids:
        lines.append(f"  replica {rid}")
        try:
            dump = sim.replicas[rid].tree.lookup().dump()
        except SeveralBlowup as exc:
            dump = f"blowup: {exc}"
        lines.extend("    " + ln for ln in dump.splitlines())
    return "\n".join(lines) + "\n"


# --- random scenario generation ---


NAME_POOL = "abcdefghijklmnopqrstuvwxyz"


def random_scenario(
    combo: ComboSpec,
    seed: int,
    n_ops: int = 5,
    replicas: int = 3,
    final_sync: bool = True,
    fresh_only: bool = False,
    factory=None,
) -> Scenario:
    """A deterministic mostly-legal script built against a live simulation."""
    rng = random.Random(f"scenario/{combo.label()}/{seed}")
    sim = Simulation(combo, replicas, seed, factory=factory)
    script: List[Tuple[str, ...]] = []
    fresh = iter(NAME_POOL)
    done = 0
    for _ in range(n_ops * 30):
        if done >= n_ops:
            break
        if done and script and script[-1] != ("sync",) and rng.random() < 0.18:
            sim.sync_all()
            script.append(("sync",))
            continue
        rid = rng.choice(sim.rids)
        action = _random_action(sim, rid, rng, fresh, fresh_only)
        if action is None:
            continue
        record = sim.execute(action)
        if record.violation is None:
            script.append(action)
            done += 1
        else:
            sim.steps -= 1
    if final_sync and script and script[-1] != ("sync",):
        sim.execute(("sync",))
        script.append(("sync",))
    return Scenario(combo=combo, replicas=replicas, seed=seed, script=script)


def _random_action(
    sim: Simulation, rid: str, rng: random.Random, fresh, fresh_only: bool = False
) -> Optional[Tuple[str, ...]]:
    tree = sim.replicas[rid].tree
    combo = sim.combo
    try:
        lt = tree.lookup()
    except SeveralBlowup:
        return None
    if combo.repr_name == "word":
        here = [inst for inst in lt.instances.values() if not inst.ghost]
        roll = rng.random()
        if here and roll < 0.25:
            return (rid, "rmv", _atom_path(lt, rng.choice(here)))
        parent = "/" if not here or rng.random() < 0.5 else _atom_path(lt, rng.choice(here))
        atom = rng.choice("abcde")
        if combo.pi_mode is not None and rng.random() < 0.4:
            return (rid, "insert", atom, parent, str(rng.randrange(3)))
        return (rid, "add", atom, parent)
    names = sorted(
        {
            v.element if isinstance(v, PositionedNode) else v
            for v in lt.nodes_present()
        },
        key=sort_key,
    )
    roll = rng.random()
    if names and roll < 0.25:
        return (rid, "rmv", rng.choice(names))
    parent = "root" if not names or rng.random() < 0.5 else rng.choice(names)
    if names and not fresh_only and rng.random() < 0.25:
        node = rng.choice(names)
    else:
        node = next(fresh, None)
        if node is None:
            node = rng.choice(NAME_POOL) + str(rng.randrange(100))
    if combo.pi_mode is not None and rng.random() < 0.4:
        return (rid, "insert", node, parent, str(rng.randrange(3)))
    return (rid, "add", node, parent)


def _atom_path(lt: LookupTree, inst) -> str:
    atoms = []
    key = inst.key
    while key != ():
        atoms.append(lt.instances[key].label)
        key = lt.instances[key].parent
    return "/" + "/".join(reversed(atoms))


# --- oracles and per-step checks ---


def oracle_membership(kind: str, history: List[SetOp], e: Any) -> bool:
    """Decide membership of e from the op history alone, one rule per kind."""
    mine = [op for op in history if op.element == e]
    if kind == "g":
        return any(op.verb == ADD for op in mine)
    if kind == "2p":
        return any(op.verb == ADD for op in mine) and not any(
            op.verb == RMV for op in mine
        )
    if kind == "lww":
        if not mine:
            return False
        return max(mine, key=lambda op: op.stamp).verb == ADD
    if kind == "c":
        return sum(op.delta for op in mine) > 0
    if kind == "or":
        added = set()
        removed = set()
        for op in mine:
            if op.verb == ADD:
                added.add(op.tag)
            else:
                removed |= op.tags
        return bool(added - removed)
    raise ValueError(kind)


def _set_histories(combo: ComboSpec, ops: Iterable[TreeOp]) -> Dict[str, List[SetOp]]:
    """SetOps delivered so far, grouped by the payload set they touch."""
    out: Dict[str, List[SetOp]] = {}
    for op in ops:
        if combo.repr_name == "word":
            out.setdefault("paths", []).extend(op.node_ops)
        else:
            out.setdefault("nodes", []).extend(op.node_ops)
            out.setdefault("edges", []).extend(op.edge_ops)
    if combo.repr_name == "edge":
        out.pop("nodes", None)
    return out


def oracle_mismatches(combo: ComboSpec, tree: Any, ops: List[TreeOp]) -> List[str]:
    """Compare each payload set's lookup with the independent membership rule."""
    problems = []
    for name, history in _set_histories(combo, ops).items():
        payload = getattr(tree, name)
        shown = payload.lookup()
        for e in {op.element for op in history}:
            expect = oracle_membership(combo.kind, history, e)
            if (e in shown) != expect:
                problems.append(
                    f"{name} set disagrees on {render(e)}:"
                    f" oracle={expect} lookup={e in shown}"
                )
    return problems


def tree_validity(lt: LookupTree) -> Optional[str]:
    try:
        lt.validate()
    except AssertionError as exc:
        return str(exc)
    return None


def witness_map(combo: ComboSpec, lt: LookupTree) -> Dict[Any, Tuple]:
    """Where each surviving identity sits: moves show up as value changes."""
    if combo.repr_name == "word":
        return {inst.node: inst.key for inst in lt.instances.values()}
    return {inst.key: inst.parent for inst in lt.instances.values()}


def witness_moves(before: Dict[Any, Tuple], after: Dict[Any, Tuple]) -> List[str]:
    return [
        f"{render(k)} moved {before[k]!r} -> {after[k]!r}"
        for k in before
        if k in after and before[k] != after[k]
    ]


# --- delivery schedules ---


def causal_deps(envelopes: List[Envelope]) -> List[Set[int]]:
    """For each envelope, the indices that must be delivered before it."""
    deps: List[Set[int]] = []
    for e in envelopes:
        before = {
            j
            for j, f in enumerate(envelopes)
            if f is not e and e.deps.get(f.origin) >= f.seq
        }
        deps.append(before)
    return deps


def linear_extensions(deps: List[Set[int]], limit: Optional[int] = None) -> List[Tuple[int, ...]]:
    n = len(deps)
    out: List[Tuple[int, ...]] = []

    def rec(prefix: Tuple[int, ...], done: Set[int]) -> None:
        if limit is not None and len(out) >= limit:
            return
        if len(prefix) == n:
            out.append(prefix)
            return
        for i in range(n):
            if i not in done and deps[i] <= done:
                rec(prefix + (i,), done | {i})

    rec((), set())
    return out


def sampled_extensions(
    deps: List[Set[int]], count: int, rng: random.Random
) -> List[Tuple[int, ...]]:
    n = len(deps)
    out = []
    for _ in range(count):
        done: Set[int] = set()
        order: List[int] = []
        while len(order) < n:
            ready = [i for i in range(n) if i not in done and deps[i] <= done]
            pick = rng.choice(ready)
            order.append(pick)
            done.add(pick)
        out.append(tuple(order))
    return sorted(set(out))


# --- convergence checking ---


@dataclass
class ConvergenceReport:
    combo: ComboSpec
    scenarios: int = 0
    schedules: int = 0
    divergences: List[str] = field(default_factory=list)
    oracle_mismatches: List[str] = field(default_factory=list)
    validity_violations: List[str] = field(default_factory=list)
    monotonic_violations: List[str] = field(default_factory=list)
    parent_moves: int = 0

    @property
    def passed(self) -> bool:
        return not (
            self.divergences
            or self.oracle_mismatches
            or self.validity_violations
            or self.monotonic_violations
        )

    def summary(self) -> str:
        verdict = "pass" if self.passed else "FAIL"
        return (
            f"{self.combo.label()}: {verdict}"
            f" scenarios={self.scenarios} schedules={self.schedules}"
            f" divergences={len(self.divergences)}"
            f" oracle={len(self.oracle_mismatches)}"
            f" validity={len(self.validity_violations)}"
            f" monotonic={len(self.monotonic_violations)}"
            f" moves={self.parent_moves}"
        )


def _observe_step(
    combo: ComboSpec,
    tree: Any,
    delivered: List[TreeOp],
    prev_witness: Optional[Dict],
    report: ConvergenceReport,
    where: str,
) -> Optional[Dict]:
    """Validity, oracle, and move checks after one delivery; returns witness."""
    try:
        lt = tree.lookup()
    except SeveralBlowup as exc:
        report.validity_violations.append(f"{where}: {exc}")
        return prev_witness
    problem = tree_validity(lt)
    if problem is not None:
        report.validity_violations.append(f"{where}: {problem}")
    for msg in oracle_mismatches(combo, tree, delivered):
        report.oracle_mismatches.append(f"{where}: {msg}")
    witness = witness_map(combo, lt)
    if prev_witness is not None:
        moves = witness_moves(prev_witness, witness)
        report.parent_moves += len(moves)
        if combo.is_monotone():
            for msg in moves:
                report.monotonic_violations.append(f"{where}: {msg}")
    return witness


def check_convergence(
    combo: ComboSpec,
    n_ops: int = 5,
    n_replicas: int = 3,
    n_schedules: Optional[int] = None,
    seed: int = 42,
    scenarios: int = 2,
    factory: Optional[Callable[[ComboSpec], Any]] = None,
) -> ConvergenceReport:
    """Drive seeded scenarios and compare every legal delivery schedule."""
    make_tree(combo)
    report = ConvergenceReport(combo=combo)
    first_failure: Optional[Scenario] = None
    for k in range(scenarios):
        scn = random_scenario(
            combo,
            seed + k,
            n_ops,
            n_replicas,
            final_sync=combo.flavor == "op",
        )
        before = len(report.divergences)
        _check_one(combo, scn, n_schedules, report, factory)
        report.scenarios += 1
        if first_failure is None and len(report.divergences) > before:
            first_failure = scn
    if first_failure is not None:
        report.divergences = [
            _shrink(combo, first_failure, n_schedules, factory, report.divergences[0])
        ]
    return report


def _check_one(
    combo: ComboSpec,
    scn: Scenario,
    n_schedules: Optional[int],
    report: ConvergenceReport,
    factory: Optional[Callable[[ComboSpec], Any]],
) -> None:
    sim = Simulation(combo, scn.replicas, scn.seed, factory)
    witnesses: Dict[str, Optional[Dict]] = {rid: None for rid in sim.rids}
    # which local-op indices each replica's state reflects (state flavor joins)
    know: Dict[str, Set[int]] = {rid: set() for rid in sim.rids}
    for step, action in enumerate(scn.script, start=1):
        record = sim.execute(action)
        if record.violation is not None:
            continue
        if action[0] == "sync":
            union = set().union(*know.values())
            for rid in know:
                know[rid] = set(union)
            touched = sim.rids
        else:
            rid, verb = action[0], action[1]
            if verb == "merge":
                know[rid] |= know[action[2]]
            elif verb != "deliver":
                know[rid].add(len(sim.local_ops) - 1)
            touched = [rid]
        for rid in touched:
            if combo.flavor == "op":
                known = sim.replicas[rid].clock.delivered
                seen = [
                    e.payload
                    for e in sim.envelopes
                    if known.get(e.origin) >= e.seq
                ]
            else:
                seen = [sim.local_ops[i][1] for i in sorted(know[rid])]
            witnesses[rid] = _observe_step(
                combo,
                sim.replicas[rid].tree,
                seen,
                witnesses[rid],
                report,
                f"{combo.label()} seed={scn.seed} step={step} replica={rid}",
            )
    if combo.flavor == "op":
        _check_op_schedules(combo, scn, sim, n_schedules, report, factory)
    else:
        _check_state_schedules(combo, scn, sim, report)


def _check_op_schedules(
    combo: ComboSpec,
    scn: Scenario,
    sim: Simulation,
    n_schedules: Optional[int],
    report: ConvergenceReport,
    factory: Optional[Callable[[ComboSpec], Any]],
) -> None:
    envelopes = sim.envelopes
    deps = causal_deps(envelopes)
    if len(envelopes) <= 7 and n_schedules is None:
        orders = linear_extensions(deps)
    else:
        rng = random.Random(f"schedules/{combo.label()}/{scn.seed}")
        orders = sampled_extensions(deps, n_schedules or 32, rng)
    build = factory or make_tree
    finals: Dict[str, Tuple[int, ...]] = {}
    for order in orders:
        observer = build(combo)
        witness: Optional[Dict] = None
        delivered: List[TreeOp] = []
        for pos, i in enumerate(order, start=1):
            observer.apply_remote(envelopes[i].payload)
            delivered.append(envelopes[i].payload)
            witness = _observe_step(
                combo,
                observer,
                delivered,
                witness,
                report,
                f"{combo.label()} seed={scn.seed} order={order} delivery={pos}",
            )
        try:
            final = observer.canonical() + "\n" + observer.lookup().dump()
        except SeveralBlowup as exc:
            final = f"blowup: {exc}"
        finals.setdefault(final, order)
        report.schedules += 1
    if len(finals) > 1:
        shapes = sorted(finals)
        report.divergences.append(
            f"seed={scn.seed}: schedules {finals[shapes[0]]} and"
            f" {finals[shapes[1]]} disagree:\n--- {finals[shapes[0]]}\n"
            f"{shapes[0]}\n--- {finals[shapes[1]]}\n{shapes[1]}"
        )
        return
    if finals:
        shape = next(iter(finals))
        for rid, rep in sim.replicas.items():
            try:
                here = rep.tree.canonical() + "\n" + rep.tree.lookup().dump()
            except SeveralBlowup as exc:
                here = f"blowup: {exc}"
            if here != shape:
                report.divergences.append(
                    f"seed={scn.seed}: replica {rid} disagrees with schedules:"
                    f"\n--- replica\n{here}\n--- schedules\n{shape}"
                )
                return


def _check_state_schedules(
    combo: ComboSpec,
    scn: Scenario,
    sim: Simulation,
    report: ConvergenceReport,
) -> None:
    rids = sim.rids
    ops = [op for _, op in sim.local_ops]
    finals: Dict[str, Tuple[str, ...]] = {}
    for perm in itertools.permutations(rids):
        acc = sim.replicas[perm[0]].tree.copy()
        clock = ReplicaClock(f"fold-{'-'.join(perm)}", scn.seed)
        for rid in perm[1:]:
            acc.merge(sim.replicas[rid].tree, clock)
        acc.merge(sim.replicas[perm[0]].tree, clock)
        try:
            final = acc.canonical() + "\n" + acc.lookup().dump()
        except SeveralBlowup as exc:
            final = f"blowup: {exc}"
        finals.setdefault(final, perm)
        report.schedules += 1
        where = f"{combo.label()} seed={scn.seed} fold={'-'.join(perm)}"
        _observe_step(combo, acc, ops, None, report, where)
    if len(finals) > 1:
        shapes = sorted(finals)
        report.divergences.append(
            f"seed={scn.seed}: folds {finals[shapes[0]]} and {finals[shapes[1]]}"
            f" disagree:\n--- {finals[shapes[0]]}\n{shapes[0]}"
            f"\n--- {finals[shapes[1]]}\n{shapes[1]}"
        )


def _shrink(
    combo: ComboSpec,
    scn: Scenario,
    n_schedules: Optional[int],
    factory: Optional[Callable[[ComboSpec], Any]],
    first: str,
) -> str:
    """Greedy script minimization keeping the first divergence reproducible."""

    def still_fails(candidate: Scenario) -> bool:
        probe = ConvergenceReport(combo=combo)
        _check_one(combo, candidate, n_schedules, probe, factory)
        return bool(probe.divergences)

    if not still_fails(scn):
        return first
    script = list(scn.script)
    changed = True
    while changed:
        changed = False
        for i in range(len(script)):
            cand = replace(scn, script=script[:i] + script[i + 1 :])
            if still_fails(cand):
                script = list(cand.script)
                scn = cand
                changed = True
                break
    probe = ConvergenceReport(combo=combo)
    _check_one(combo, scn, n_schedules, probe, factory)
    detail = probe.divergences[0] if probe.divergences else first
    return "minimized scenario:\n" + serialize_scenario(scn) + detail

"""Connection and mapping policies that turn a replicated graph into a tree.

The connection step repairs orphans (nodes whose ancestors were removed) and
yields a rooted graph; the mapping step collapses remaining multi-parent
conflicts into a single tree.  Both steps are pure and deterministic, so every
replica that reaches the same payload derives the same tree.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Set, Tuple

from .errors import SeveralBlowup
from .lookup import LookupTree
from .render import render, sort_key

CONNECT_POLICIES = ("skip", "reappear", "root", "compact")
MAP_POLICIES = ("several", "newest", "highest", "shortest", "zero")

DEFAULT_SEVERAL_CAP = 10 ** 5


@dataclass(frozen=True)
class EdgeInfo:
    """A directed edge plus the metadata mapping policies may need."""

    src: Any
    dst: Any
    weight: int = 0
    pos: Any = None

    def identity(self):
        return (sort_key(self.dst), sort_key(self.src), sort_key(self.pos))


@dataclass
class HistoryGraph:
    """Every node and edge ever observed added, for reconnection policies."""

    nodes: Set[Any] = field(default_factory=set)
    edges: Set[Tuple] = field(default_factory=set)  # (src, dst, pos)

    def record_edge(self, src: Any, dst: Any, pos: Any = None) -> None:
        self.nodes.add(src)
        self.nodes.add(dst)
        self.edges.add((src, dst, pos))

    def record_node(self, node: Any) -> None:
        self.nodes.add(node)

    def merge(self, other: "HistoryGraph") -> None:
        self.nodes |= other.nodes
        self.edges |= other.edges

    def copy(self) -> "HistoryGraph":
        return HistoryGraph(set(self.nodes), set(self.edges))

    def parents_map(self) -> Dict[Any, Set[Any]]:
        out: Dict[Any, Set[Any]] = {}
        for src, dst, _ in self.edges:
            out.setdefault(dst, set()).add(src)
        return out


@dataclass
class RootedGraph:
    """Connection-policy output: every node is reachable from the root."""

    root: Any
    nodes: Set[Any]
    edges: List[EdgeInfo]

    def in_edges(self) -> Dict[Any, List[EdgeInfo]]:
        table: Dict[Any, List[EdgeInfo]] = {n: [] for n in self.nodes}
        for e in self.edges:
            table[e.dst].append(e)
        for dst in table:
            table[dst].sort(key=EdgeInfo.identity)
        return table

    def out_edges(self) -> Dict[Any, List[EdgeInfo]]:
        table: Dict[Any, List[EdgeInfo]] = {n: [] for n in self.nodes}
        table[self.root] = []
        for e in self.edges:
            table[e.src].append(e)
        for src in table:
            table[src].sort(key=EdgeInfo.identity)
        return table


def _reachable(root: Any, nodes: Set[Any], edges: Iterable[EdgeInfo]) -> Set[Any]:
    out: Dict[Any, List[Any]] = {}
    for e in edges:
        out.setdefault(e.src, []).append(e.dst)
    seen = {root}
    queue = deque([root])
    while queue:
        cur = queue.popleft()
        for nxt in out.get(cur, ()):
            if nxt in nodes and nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def _dedupe(edges: Iterable[EdgeInfo]) -> List[EdgeInfo]:
    best: Dict[Tuple, EdgeInfo] = {}
    for e in edges:
        key = (sort_key(e.src), sort_key(e.dst), sort_key(e.pos))
        cur = best.get(key)
        if cur is None or e.weight > cur.weight:
            best[key] = e
    return sorted(best.values(), key=EdgeInfo.identity)


def _restrict(root: Any, nodes: Set[Any], edges: Iterable[EdgeInfo]) -> RootedGraph:
    edges = [e for e in edges if e.src in nodes and e.dst in nodes]
    keep = _reachable(root, nodes, edges)
    kept_edges = [e for e in edges if e.src in keep and e.dst in keep]
    return RootedGraph(root=root, nodes=keep, edges=_dedupe(kept_edges))


def get_connected(
    start: Any,
    anchored: Set[Any],
    history: HistoryGraph,
    memo: Optional[Dict[Any, Set[Any]]] = None,
) -> Set[Any]:
    """Live, root-connected nodes that some history path joins to `start`.

    Walks history parents of dead or orphaned nodes until anchored nodes are
    hit.  A visiting guard makes history cycles terminate; results within one
    memo are consistent with each other.
    """
    if memo is None:
        memo = {}
    parents = history.parents_map()
    visiting: Set[Any] = set()

    def walk(node: Any) -> Set[Any]:
        if node in anchored:
            return {node}
        if node in memo:
            return memo[node]
        visiting.add(node)
        found: Set[Any] = set()
        for parent in sorted(parents.get(node, ()), key=sort_key):
            if parent not in visiting:
                found |= walk(parent)
        visiting.remove(node)
        memo[node] = found
        return found

    return walk(start)


def connect(
    nodes: Set[Any],
    edges: Iterable[EdgeInfo],
    history: HistoryGraph,
    policy: str,
    root: Any,
) -> RootedGraph:
    """Apply one orphan-handling policy and return a rooted graph."""
    if policy not in CONNECT_POLICIES:
        raise ValueError(f"unknown connection policy {policy!r}")
    live = set(nodes) | {root}
    all_edges = list(edges)
    graph_edges = [e for e in all_edges if e.src in live and e.dst in live]
    reach = _reachable(root, live, graph_edges)
    orphans = live - reach
    orphan_edges = sorted(
        (e for e in all_edges if e.dst in orphans and e.src not in live),
        key=EdgeInfo.identity,
    )

    if policy == "skip":
        return _restrict(root, live, graph_edges)

    if policy == "root":
        rewired = [
            EdgeInfo(src=root, dst=e.dst, weight=e.weight, pos=e.pos)
            for e in orphan_edges
        ]
        return _restrict(root, live, graph_edges + rewired)

    if policy == "compact":
        memo: Dict[Any, Set[Any]] = {}
        rewired = []
        for e in orphan_edges:
            for anchor in sorted(
                get_connected(e.src, reach, history, memo), key=sort_key
            ):
                rewired.append(
                    EdgeInfo(src=anchor, dst=e.dst, weight=e.weight, pos=e.pos)
                )
        return _restrict(root, live, graph_edges + rewired)

    # reappear: recreate, from history, every path from the root down to each
    # orphan edge's source, then keep the orphan edge itself.
    revived_nodes: Set[Any] = set()
    revived_edges: List[EdgeInfo] = []
    hist_parents = history.parents_map()
    for e in orphan_edges:
        ancestors = {e.src}
        queue = deque([e.src])
        while queue:
            cur = queue.popleft()
            for parent in hist_parents.get(cur, ()):
                if parent not in ancestors:
                    ancestors.add(parent)
                    queue.append(parent)
        revived_nodes |= ancestors
        for src, dst, pos in history.edges:
            if dst in ancestors:
                revived_edges.append(EdgeInfo(src=src, dst=dst, weight=-1, pos=pos))
    combined = graph_edges + list(orphan_edges) + revived_edges
    return _restrict(root, live | revived_nodes, combined)


def _instances_from_choice(g: RootedGraph, choice: Dict[Any, EdgeInfo]) -> LookupTree:
    tree = LookupTree(root_label=render(g.root))
    ordered = sorted(choice, key=sort_key)
    placed = {g.root}
    # place parents before children so validation-by-construction holds
    pending = deque(ordered)
    spins = 0
    while pending:
        node = pending.popleft()
        edge = choice[node]
        if edge.src in placed:
            parent_key = () if edge.src == g.root else (edge.src,)
            tree.add_instance((node,), node, parent_key, pos=edge.pos)
            placed.add(node)
            spins = 0
        else:
            pending.append(node)
            spins += 1
            if spins > len(pending):
                raise AssertionError("parent choice does not form a tree")
    return tree


def _already_tree(g: RootedGraph) -> Optional[Dict[Any, EdgeInfo]]:
    table = g.in_edges()
    choice = {}
    for node in g.nodes:
        if node == g.root:
            continue
        if len(table[node]) != 1:
            return None
        choice[node] = table[node][0]
    return choice


def _map_several(g: RootedGraph, cap: int) -> LookupTree:
    tree = LookupTree(root_label=render(g.root))
    out = g.out_edges()
    count = 0

    def walk(node: Any, key: Tuple, on_path: Set[Any]) -> None:
        nonlocal count
        for edge in out.get(node, ()):
            if edge.dst in on_path:
                continue
            count += 1
            if count > cap:
                raise SeveralBlowup(cap)
            child_key = key + ((edge.dst, edge.pos),)
            label = render(edge.dst)
            if key:
                label += "/" + ".".join(render(step[0]) for step in key)
            tree.add_instance(
                child_key, edge.dst, key, label=label, pos=edge.pos
            )
            on_path.add(edge.dst)
            walk(edge.dst, child_key, on_path)
            on_path.remove(edge.dst)

    walk(g.root, (), {g.root})
    return tree


def _map_shortest(g: RootedGraph) -> LookupTree:
    table = g.in_edges()
    depth = {g.root: 0}
    frontier = [g.root]
    choice: Dict[Any, EdgeInfo] = {}
    out = g.out_edges()
    d = 0
    while frontier:
        nxt = []
        for node in frontier:
            for edge in out.get(node, ()):
                if edge.dst not in depth:
                    nxt.append(edge.dst)
                    depth[edge.dst] = d + 1
        nxt = sorted(set(nxt), key=sort_key)
        for node in nxt:
            candidates = [
                e for e in table[node] if depth.get(e.src, -1) == depth[node] - 1
            ]
            choice[node] = min(
                candidates, key=lambda e: (sort_key(e.src), sort_key(e.pos))
            )
        frontier = nxt
        d += 1
    return _instances_from_choice(g, choice)


def _map_zero(g: RootedGraph) -> LookupTree:
    table = g.in_edges()
    out = g.out_edges()
    choice: Dict[Any, EdgeInfo] = {}
    queue = deque([g.root])
    seen = {g.root}
    while queue:
        node = queue.popleft()
        for edge in out.get(node, ()):
            if len(table[edge.dst]) >= 2 or edge.dst in seen:
                continue
            choice[edge.dst] = edge
            seen.add(edge.dst)
            queue.append(edge.dst)
    return _instances_from_choice(g, choice)


@dataclass
class _WorkEdge:
    src: Any
    dst: Any
    eff: int
    idx: int
    inner: Optional["_WorkEdge"] = None
    orig: Optional[EdgeInfo] = None

    def pref(self):
        return (self.eff, -self.idx)


def _edmonds(
    nodes: Set[Any], edges: List[_WorkEdge], root: Any, level: int = 0
) -> Dict[Any, _WorkEdge]:
    """Maximum-weight arborescence; returned values are members of `edges`."""
    best: Dict[Any, _WorkEdge] = {}
    for e in edges:
        if e.dst == root or e.src == e.dst:
            continue
        cur = best.get(e.dst)
        if cur is None or e.pref() > cur.pref():
            best[e.dst] = e

    cycle = None
    for start in best:
        path = []
        seen = set()
        cur = start
        while cur in best and cur not in seen:
            seen.add(cur)
            path.append(cur)
            cur = best[cur].src
        if cur in seen:
            cycle = path[path.index(cur):]
            break
    if cycle is None:
        return best

    cyc = set(cycle)
    super_node = ("__cycle__", level)
    new_nodes = (nodes - cyc) | {super_node}
    new_edges: List[_WorkEdge] = []
    for e in edges:
        src = super_node if e.src in cyc else e.src
        dst = super_node if e.dst in cyc else e.dst
        if src == dst:
            continue
        eff = e.eff - best[e.dst].eff if dst == super_node else e.eff
        new_edges.append(_WorkEdge(src=src, dst=dst, eff=eff, idx=e.idx, inner=e))

    sub = _edmonds(new_nodes, new_edges, root, level + 1)
    # every chosen contracted edge unwraps to exactly one edge of this level
    result: Dict[Any, _WorkEdge] = {}
    entering = None
    for dst, e in sub.items():
        if dst == super_node:
            entering = e.inner
        else:
            result[dst] = e.inner
    for node in cycle:
        if entering is None or node != entering.dst:
            result[node] = best[node]
    if entering is not None:
        result[entering.dst] = entering
    return result


def _map_weighted(g: RootedGraph) -> LookupTree:
    ranked = sorted(g.edges, key=EdgeInfo.identity)
    # power-of-two bonuses give every edge subset a distinct total, so the
    # maximum-weight tree is unique and needs no further tie-breaking
    scale = 1 << len(ranked)
    work = [
        _WorkEdge(
            src=e.src,
            dst=e.dst,
            eff=e.weight * scale + (1 << (len(ranked) - 1 - i)),
            idx=i,
            orig=e,
        )
        for i, e in enumerate(ranked)
    ]
    chosen = _edmonds(set(g.nodes), work, g.root)
    choice: Dict[Any, EdgeInfo] = {}
    for dst, e in chosen.items():
        base = e
        while base.orig is None:
            base = base.inner
        choice[dst] = base.orig
    return _instances_from_choice(g, choice)


def map_to_tree(
    g: RootedGraph, policy: str, cap: int = DEFAULT_SEVERAL_CAP
) -> LookupTree:
    """Collapse a rooted graph into one tree of instances."""
    if policy not in MAP_POLICIES:
        raise ValueError(f"unknown mapping policy {policy!r}")
    direct = _already_tree(g)
    if direct is not None:
        return _instances_from_choice(g, direct)
    if policy == "several":
        return _map_several(g, cap)
    if policy == "shortest":
        return _map_shortest(g)
    if policy == "zero":
        return _map_zero(g)
    return _map_weighted(g)

"""Connection and mapping policies on raw graphs, against brute-force oracles."""

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treecrdt.errors import SeveralBlowup
from treecrdt.policies import (
    CONNECT_POLICIES,
    MAP_POLICIES,
    EdgeInfo,
    HistoryGraph,
    RootedGraph,
    connect,
    get_connected,
    map_to_tree,
)

ROOT = "root"


def E(src, dst, weight=0, pos=None):
    return EdgeInfo(src=src, dst=dst, weight=weight, pos=pos)


def history_of(*edges):
    h = HistoryGraph()
    for src, dst in edges:
        h.record_edge(src, dst)
    return h


def rooted(nodes, edges, history=None, policy="skip"):
    return connect(set(nodes), edges, history or HistoryGraph(), policy, ROOT)


# --- connection policies ---


def cycle_fixture():
    """Two concurrent chains that close a two-node cycle under the root."""
    nodes = {"x", "y"}
    edges = [E(ROOT, "x"), E("x", "y"), E(ROOT, "y"), E("y", "x")]
    history = history_of((ROOT, "x"), ("x", "y"), (ROOT, "y"), ("y", "x"))
    return nodes, edges, history


def orphan_fixture():
    """A surviving child n whose parent m was removed concurrently."""
    nodes = {"n"}
    edges = [E("m", "n")]
    history = history_of((ROOT, "m"), ("m", "n"))
    return nodes, edges, history


def test_connect_keeps_fully_live_graph():
    nodes, edges, history = cycle_fixture()
    for policy in CONNECT_POLICIES:
        g = connect(nodes, edges, history, policy, ROOT)
        assert g.nodes == {ROOT, "x", "y"}
        assert {(e.src, e.dst) for e in g.edges} == {
            (ROOT, "x"),
            ("x", "y"),
            (ROOT, "y"),
            ("y", "x"),
        }


def test_skip_drops_orphans():
    nodes, edges, history = orphan_fixture()
    g = connect(nodes, edges, history, "skip", ROOT)
    assert g.nodes == {ROOT}
    assert g.edges == []


def test_root_policy_rewires_orphan_under_root():
    nodes, edges, history = orphan_fixture()
    g = connect(nodes, edges, history, "root", ROOT)
    assert g.nodes == {ROOT, "n"}
    assert {(e.src, e.dst) for e in g.edges} == {(ROOT, "n")}


def test_reappear_recreates_removed_ancestors():
    nodes, edges, history = orphan_fixture()
    g = connect(nodes, edges, history, "reappear", ROOT)
    assert g.nodes == {ROOT, "m", "n"}
    assert {(e.src, e.dst) for e in g.edges} == {(ROOT, "m"), ("m", "n")}


def test_compact_attaches_orphan_to_live_historical_ancestor():
    nodes, edges, history = orphan_fixture()
    g = connect(nodes, edges, history, "compact", ROOT)
    assert g.nodes == {ROOT, "n"}
    assert {(e.src, e.dst) for e in g.edges} == {(ROOT, "n")}


def test_reappear_recreates_deep_chain():
    # history root -> a -> b -> c; only c survives, attached via (b, c)
    nodes = {"c"}
    edges = [E("b", "c")]
    history = history_of((ROOT, "a"), ("a", "b"), ("b", "c"))
    g = connect(nodes, edges, history, "reappear", ROOT)
    assert g.nodes == {ROOT, "a", "b", "c"}
    assert {(e.src, e.dst) for e in g.edges} == {(ROOT, "a"), ("a", "b"), ("b", "c")}


def test_compact_skips_dead_middle_ancestors():
    nodes = {"c"}
    edges = [E("b", "c")]
    history = history_of((ROOT, "a"), ("a", "b"), ("b", "c"))
    g = connect(nodes, edges, history, "compact", ROOT)
    assert {(e.src, e.dst) for e in g.edges} == {(ROOT, "c")}


def test_get_connected_returns_live_node_itself():
    history = history_of((ROOT, "m"), ("m", "x"))
    assert get_connected("x", {ROOT, "m", "x"}, history) == {"x"}


def test_get_connected_climbs_through_removed_parent():
    history = history_of((ROOT, "m"), ("m", "x"))
    assert get_connected("x", {ROOT}, history) == {ROOT}


def test_get_connected_unions_all_live_anchors():
    # x has parents p1 (live) and p2 (dead, child of live q)
    history = history_of((ROOT, "p1"), (ROOT, "q"), ("q", "p2"), ("p1", "x"), ("p2", "x"))
    anchored = {ROOT, "p1", "q"}
    assert get_connected("x", anchored, history) == {"p1", "q"}


def test_get_connected_survives_history_cycles():
    history = history_of((ROOT, "a"), ("a", "b"), ("b", "a"), ("b", "x"))
    assert get_connected("x", {ROOT}, history) == {ROOT}


def test_root_policy_keeps_orphan_component_internal_edges():
    # dead parent d; orphans a -> b connected between themselves
    nodes = {"a", "b"}
    edges = [E("d", "a"), E("a", "b")]
    history = history_of((ROOT, "d"), ("d", "a"), ("a", "b"))
    g = connect(nodes, edges, history, "root", ROOT)
    assert {(e.src, e.dst) for e in g.edges} == {(ROOT, "a"), ("a", "b")}


# --- mapping policies ---


def test_cycle_maps_to_four_instances_under_several():
    nodes, edges, history = cycle_fixture()
    g = connect(nodes, edges, history, "skip", ROOT)
    tree = map_to_tree(g, "several")
    labels = sorted(inst.label for inst in tree.instances.values())
    assert labels == ["x", "x/y", "y", "y/x"]
    assert len(tree.instances) == 4
    tree.validate()


def test_cycle_maps_to_flat_pair_under_shortest():
    nodes, edges, history = cycle_fixture()
    g = connect(nodes, edges, history, "skip", ROOT)
    tree = map_to_tree(g, "shortest")
    assert tree.dump() == "root\n  x\n  y"


def test_cycle_vanishes_under_zero():
    nodes, edges, history = cycle_fixture()
    g = connect(nodes, edges, history, "skip", ROOT)
    tree = map_to_tree(g, "zero")
    assert tree.dump() == "root"


def test_zero_drops_subtree_below_multi_parent_node():
    g = RootedGraph(
        root=ROOT,
        nodes={ROOT, "a", "b", "c", "d"},
        edges=[E(ROOT, "a"), E(ROOT, "b"), E("a", "c"), E("b", "c"), E("c", "d")],
    )
    tree = map_to_tree(g, "zero")
    assert tree.dump() == "root\n  a\n  b"


def test_several_cap_raises_instead_of_hanging():
    names = [f"n{i}" for i in range(7)]
    edges = [E(ROOT, n) for n in names]
    edges += [E(a, b) for a in names for b in names if a != b]
    g = RootedGraph(root=ROOT, nodes=set(names) | {ROOT}, edges=edges)
    with pytest.raises(SeveralBlowup):
        map_to_tree(g, "several", cap=5000)


def test_newest_prefers_higher_weight_edge():
    g = RootedGraph(
        root=ROOT,
        nodes={ROOT, "a", "b"},
        edges=[E(ROOT, "a", weight=1), E(ROOT, "b", weight=2), E("a", "b", weight=3)],
    )
    tree = map_to_tree(g, "newest")
    assert tree.dump() == "root\n  a\n    b"


# brute-force oracle: enumerate every parent choice and maximize the same
# scaled score the implementation uses


def brute_best_tree(g: RootedGraph):
    ranked = sorted(g.edges, key=EdgeInfo.identity)
    scale = 1 << len(ranked)
    eff = {
        id(e): e.weight * scale + (1 << (len(ranked) - 1 - i))
        for i, e in enumerate(ranked)
    }
    others = sorted(g.nodes - {g.root}, key=str)
    table = {n: [e for e in ranked if e.dst == n] for n in others}
    best_score, best_choice = None, None
    for combo in itertools.product(*(table[n] for n in others)):
        choice = dict(zip(others, combo))
        parent = {n: e.src for n, e in choice.items()}
        ok = True
        for n in others:
            seen = set()
            cur = n
            while cur != g.root:
                if cur in seen or cur not in parent:
                    ok = False
                    break
                seen.add(cur)
                cur = parent[cur]
            if not ok:
                break
        if not ok:
            continue
        score = sum(eff[id(e)] for e in combo)
        if best_score is None or score > best_score:
            best_score, best_choice = score, choice
    return best_choice


def graphs(draw):
    names = ["a", "b", "c", "d"]
    n = draw(st.integers(2, 4))
    nodes = set(names[:n])
    pool = [(s, d) for s in nodes | {ROOT} for d in nodes if s != d]
    picked = draw(
        st.lists(st.sampled_from(pool), min_size=n, max_size=len(pool), unique=True)
    )
    weights = draw(
        st.lists(st.integers(0, 3), min_size=len(picked), max_size=len(picked))
    )
    edges = [E(s, d, weight=w) for (s, d), w in zip(picked, weights)]
    return connect(nodes, edges, HistoryGraph(), "skip", ROOT)


@settings(max_examples=150, deadline=None)
@given(data=st.data())
def test_weighted_mapping_matches_brute_force(data):
    g = graphs(data.draw)
    oracle = brute_best_tree(g)
    tree = map_to_tree(g, "newest")
    tree.validate()
    parents = {inst.node: inst.parent for inst in tree.instances.values()}
    want = {n: (() if e.src == ROOT else (e.src,)) for n, e in oracle.items()}
    assert parents == want


@settings(max_examples=120, deadline=None)
@given(data=st.data())
def test_every_policy_combo_yields_valid_tree(data):
    g = graphs(data.draw)
    for policy in MAP_POLICIES:
        tree = map_to_tree(g, policy)
        tree.validate()


@settings(max_examples=80, deadline=None)
@given(data=st.data())
def test_unweighted_policies_ignore_weights(data):
    g = graphs(data.draw)
    stripped = RootedGraph(
        root=g.root,
        nodes=set(g.nodes),
        edges=[E(e.src, e.dst, weight=0) for e in g.edges],
    )
    for policy in ("several", "shortest", "zero"):
        assert map_to_tree(g, policy).dump() == map_to_tree(stripped, policy).dump()

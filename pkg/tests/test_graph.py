"""Graph-backed tree CRDTs: preconditions, removal payloads, policy behavior."""

import pytest
from helpers import REPLICAS, TreeGroup
from treecrdt.clocks import ReplicaClock
from treecrdt.errors import IllegalCombo, PreconditionViolation
from treecrdt.graph import GraphTree, IncrementalTwoPhaseGraph
from treecrdt.sets import FLAVORS, KINDS


def fresh(kind="or", flavor="op", **kw):
    return GraphTree(kind, flavor, **kw)


def clock(r="r1"):
    return ReplicaClock(r)


# --- sequential behavior ---


def test_add_under_root():
    t, c = fresh(), clock()
    t.gen_add("a", "root", c)
    assert t.lookup().dump() == "root\n  a"


def test_add_existing_node_rejected():
    t, c = fresh(), clock()
    t.gen_add("a", "root", c)
    with pytest.raises(PreconditionViolation):
        t.gen_add("a", "root", c)


def test_add_under_missing_parent_rejected():
    t, c = fresh(), clock()
    with pytest.raises(PreconditionViolation):
        t.gen_add("a", "b", c)


def test_root_cannot_be_added_or_removed():
    t, c = fresh(), clock()
    with pytest.raises(PreconditionViolation):
        t.gen_add("root", "root", c)
    with pytest.raises(PreconditionViolation):
        t.gen_rmv("root", c)


def test_rmv_absent_node_rejected():
    t, c = fresh(), clock()
    with pytest.raises(PreconditionViolation):
        t.gen_rmv("a", c)


def test_rmv_carries_full_subtree():
    t, c = fresh(), clock()
    t.gen_add("a", "root", c)
    t.gen_add("b", "a", c)
    op = t.gen_rmv("a", c)
    assert {sub.element for sub in op.node_ops} == {"a", "b"}
    assert {sub.element for sub in op.edge_ops} == {("root", "a"), ("a", "b")}
    assert t.lookup().dump() == "root"


def test_rmv_leaf_carries_single_pair():
    t, c = fresh(), clock()
    t.gen_add("a", "root", c)
    op = t.gen_rmv("a", c)
    assert {sub.element for sub in op.node_ops} == {"a"}
    assert {sub.element for sub in op.edge_ops} == {("root", "a")}


def test_grow_only_tree_rejects_removal():
    t, c = fresh(kind="g"), clock()
    t.gen_add("a", "root", c)
    with pytest.raises(PreconditionViolation):
        t.gen_rmv("a", c)


def test_two_phase_node_never_returns():
    t, c = fresh(kind="2p"), clock()
    t.gen_add("a", "root", c)
    t.gen_rmv("a", c)
    before = t.canonical()
    with pytest.raises(PreconditionViolation):
        t.gen_add("a", "root", c)
    assert t.canonical() == before


def test_sequential_history_matches_naive_tree():
    t, c = fresh(kind="lww"), clock()
    t.gen_add("docs", "root", c)
    t.gen_add("img", "root", c)
    t.gen_add("a", "docs", c)
    t.gen_rmv("a", c)
    t.gen_add("b", "docs", c)
    assert t.lookup().dump() == "root\n  docs\n    b\n  img"


# --- the lookup pair can dangle ---


def test_lookup_pair_can_reference_dead_nodes():
    trees = {r: fresh(kind="lww") for r in REPLICAS}
    clocks = {r: ReplicaClock(r) for r in REPLICAS}

    def deliver(op, *targets):
        for r in targets:
            trees[r].apply_remote(op)
            clocks[r].observe(op.max_stamp())

    deliver(trees["r3"].gen_add("m", "root", clocks["r3"]), "r1", "r2")
    deliver(trees["r3"].gen_add("p", "root", clocks["r3"]), "r1", "r2")
    # only r2 sees the third-party add of n before removing the subtree
    late_add = trees["r3"].gen_add("n", "p", clocks["r3"])
    deliver(late_add, "r2")
    rmv_op = trees["r2"].gen_rmv("p", clocks["r2"])
    # r1 never saw n, so it adds n concurrently with lower stamps
    add_op = trees["r1"].gen_add("n", "m", clocks["r1"])
    assert {sub.element for sub in rmv_op.node_ops} == {"p", "n"}
    assert max(s.stamp for s in rmv_op.node_ops) > max(
        s.stamp for s in add_op.node_ops
    )
    deliver(late_add, "r1")
    deliver(rmv_op, "r1", "r3")
    deliver(add_op, "r2", "r3")
    for tree in trees.values():
        assert ("m", "n") in tree.edges.lookup()
        assert "n" not in tree.nodes.lookup()
        assert tree.lookup().dump() == "root\n  m"


def test_concurrent_cross_adds_build_a_cycle():
    group = TreeGroup(lambda: fresh(kind="or"))
    group.add("r1", "x", "root")
    group.add("r1", "y", "x")
    group.add("r2", "y", "root")
    group.add("r2", "x", "y")
    group.sync()
    for tree in group.trees.values():
        assert tree.edges.lookup() == {
            ("root", "x"),
            ("x", "y"),
            ("root", "y"),
            ("y", "x"),
        }
        assert tree.nodes.lookup() == {"x", "y"}


@pytest.mark.parametrize(
    "map_policy,expected",
    [
        ("several", "root\n  x\n    y/x\n  y\n    x/y"),
        ("shortest", "root\n  x\n  y"),
        ("zero", "root"),
    ],
)
def test_cycle_resolved_per_mapping_policy(map_policy, expected):
    group = TreeGroup(lambda: fresh(kind="or", map_policy=map_policy))
    group.add("r1", "x", "root")
    group.add("r1", "y", "x")
    group.add("r2", "y", "root")
    group.add("r2", "x", "y")
    group.sync()
    for tree in group.trees.values():
        assert tree.lookup().dump() == expected


# --- connection policies through whole trees ---


def orphan_group(kind, flavor, connect_policy):
    group = TreeGroup(lambda: fresh(kind=kind, flavor=flavor, connect_policy=connect_policy))
    group.add("r1", "m", "root")
    group.sync()
    group.rmv("r1", "m")
    group.add("r2", "z", "m")
    group.sync()
    return group


@pytest.mark.parametrize("flavor", FLAVORS)
@pytest.mark.parametrize(
    "connect_policy,expected",
    [
        ("skip", "root"),
        ("root", "root\n  z"),
        ("reappear", "root\n  m\n    z"),
        ("compact", "root\n  z"),
    ],
)
def test_orphan_survivor_per_connection_policy(flavor, connect_policy, expected):
    group = orphan_group("or", flavor, connect_policy)
    for tree in group.trees.values():
        assert tree.lookup().dump() == expected


def test_history_survives_state_merges():
    group = orphan_group("lww", "state", "reappear")
    for tree in group.trees.values():
        assert ("m", "z", None) in tree.history.edges


# --- weighted mapping policies on live metadata ---


def two_parent_group(kind, map_policy, extra_adds=()):
    group = TreeGroup(lambda: fresh(kind=kind, map_policy=map_policy))
    group.add("r1", "a", "root")
    group.add("r1", "b", "root")
    group.sync()
    group.add("r1", "c", "a")
    group.add("r2", "c", "b")
    for replica, node, parent in extra_adds:
        group.add(replica, node, parent)
    group.sync()
    return group


def test_newest_keeps_latest_stamped_edge():
    group = two_parent_group("lww", "newest")
    for tree in group.trees.values():
        assert tree.lookup().dump() == "root\n  a\n  b\n    c"


def test_newest_uses_tag_recency_for_tagged_sets():
    group = two_parent_group("or", "newest")
    for tree in group.trees.values():
        assert tree.lookup().dump() == "root\n  a\n  b\n    c"


def test_highest_keeps_most_supported_edge():
    group = two_parent_group("c", "highest", extra_adds=[("r3", "c", "a")])
    for tree in group.trees.values():
        assert tree.edges.count(("a", "c")) == 2
        assert tree.edges.count(("b", "c")) == 1
        assert tree.lookup().dump() == "root\n  a\n    c\n  b"


def test_highest_counts_live_tags():
    group = two_parent_group("or", "highest", extra_adds=[("r3", "c", "a")])
    for tree in group.trees.values():
        assert tree.lookup().dump() == "root\n  a\n    c\n  b"


@pytest.mark.parametrize(
    "kind,map_policy",
    [("g", "newest"), ("2p", "newest"), ("c", "newest"), ("g", "highest"), ("2p", "highest"), ("lww", "highest")],
)
def test_metadata_free_kinds_reject_ranked_mapping(kind, map_policy):
    with pytest.raises(IllegalCombo):
        GraphTree(kind, "op", map_policy=map_policy)


# --- convergence smoke across kinds and flavors ---


def scripted_group(kind, flavor):
    group = TreeGroup(lambda: fresh(kind=kind, flavor=flavor, connect_policy="root"))
    group.add("r1", "a", "root")
    group.add("r2", "b", "root")
    group.sync()
    group.add("r1", "c", "a")
    group.rmv("r2", "a")
    group.add("r3", "d", "b")
    group.sync()
    group.rmv("r3", "d")
    group.add("r2", "e", "b")
    group.sync()
    return group


@pytest.mark.parametrize("flavor", FLAVORS)
@pytest.mark.parametrize("kind", [k for k in KINDS if k != "g"])
def test_scripted_history_converges(kind, flavor):
    group = scripted_group(kind, flavor)
    dumps = set(group.dumps().values())
    canons = {tree.canonical() for tree in group.trees.values()}
    assert len(dumps) == 1
    assert len(canons) == 1


# --- the add-once incremental tree ---


def test_incremental_matches_batch_on_orphan_scenario():
    group = TreeGroup(IncrementalTwoPhaseGraph)
    group.add("r1", "m", "root")
    group.sync()
    group.rmv("r1", "m")
    group.add("r2", "z", "m")
    group.sync()
    for tree in group.trees.values():
        assert tree.lookup().dump() == "root"
        assert tree.lookup().dump() == tree.batch_lookup().dump()


def test_incremental_matches_batch_stepwise():
    group = TreeGroup(IncrementalTwoPhaseGraph)
    steps = [
        ("add", "r1", "a", "root"),
        ("add", "r1", "b", "a"),
        ("sync",),
        ("rmv", "r2", "a"),
        ("add", "r1", "c", "b"),
        ("sync",),
        ("add", "r2", "d", "root"),
        ("rmv", "r2", "d"),
        ("sync",),
    ]
    for step in steps:
        if step[0] == "sync":
            group.sync()
        elif step[0] == "add":
            group.add(step[1], step[2], step[3])
        else:
            group.rmv(step[1], step[2])
        for tree in group.trees.values():
            assert tree.lookup().dump() == tree.batch_lookup().dump()
    assert len(set(group.dumps().values())) == 1


def test_incremental_orphan_add_touches_constant_nodes():
    from treecrdt.graph import TreeOp

    tree = IncrementalTwoPhaseGraph()
    tree.gen_add("m", "root")
    tree.gen_add("n", "m")
    tree.gen_rmv("n")
    # a remote add under the removed node arrives later and stays invisible
    tree.apply_remote(TreeOp("add", "w", "n"))
    assert tree.last_touched == 2
    assert tree.lookup().dump() == "root\n  m"
    assert tree.lookup().dump() == tree.batch_lookup().dump()


def test_incremental_rejects_second_add_of_same_node():
    tree = IncrementalTwoPhaseGraph()
    tree.gen_add("a", "root")
    tree.gen_rmv("a")
    with pytest.raises(PreconditionViolation):
        tree.gen_add("a", "root")

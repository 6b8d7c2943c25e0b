"""Recursive sequence elements: structural identity, ordering, and removal."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import TombstoneSequence
from treecrdt.clocks import ReplicaClock
from treecrdt.errors import IllegalCombo, PreconditionViolation
from treecrdt.sets import ADD
from treecrdt.wootr import (
    BEGIN,
    END,
    WootrSequence,
    WootrTriple,
    wootr_closure,
    wootr_order,
)


def clock(rid="r1", seed=0):
    return ReplicaClock(rid, seed)


# --- the two-site example ---


def test_two_site_example():
    c1, c2 = clock("r1"), clock("r2")
    s1 = WootrSequence("or", "op")
    s2 = WootrSequence("or", "op")
    a = WootrTriple("a", BEGIN, END)
    op_a = s1.gen_insert("a", BEGIN, END, c1)
    op_b = s1.gen_insert("b", a, END, c1)
    op_c = s2.gen_insert("c", BEGIN, END, c2)
    s2.apply(op_a)
    s2.apply(op_b)
    s1.apply(op_c)
    b = WootrTriple("b", a, END)
    c = WootrTriple("c", BEGIN, END)
    assert s1.elements.lookup() == {a, b, c}
    assert s1.text() == "abc"
    assert s2.text() == "abc"


# --- structural identity ---


def test_concurrent_identical_inserts_collapse():
    c1, c2 = clock("r1"), clock("r2")
    s1 = WootrSequence("or", "op")
    s2 = WootrSequence("or", "op")
    o1 = s1.gen_insert("x", BEGIN, END, c1)
    o2 = s2.gen_insert("x", BEGIN, END, c2)
    s1.apply(o2)
    s2.apply(o1)
    assert s1.text() == "x"
    assert len(s1.order()) == 1
    assert s1.order() == s2.order()


def test_reintroduction_is_the_same_element():
    c = clock()
    s = WootrSequence("or", "op")
    s.gen_insert("x", BEGIN, END, c)
    x = s.order()[0]
    s.gen_remove(x, c)
    assert s.text() == ""
    s.gen_insert("x", BEGIN, END, c)
    assert s.order() == [x]


# --- no tombstones: removed elements still anchor their neighbours ---


def test_insert_relative_to_concurrently_removed_element():
    c1, c2 = clock("r1"), clock("r2")
    s1 = WootrSequence("lww", "op")
    s2 = WootrSequence("lww", "op")
    op_a = s1.gen_insert("a", BEGIN, END, c1)
    s2.apply(op_a)
    a = s1.order()[0]
    op_rm = s1.gen_remove(a, c1)
    op_b = s2.gen_insert("b", a, END, c2)
    op_c = s2.gen_insert("c", BEGIN, a, c2)
    s1.apply(op_b)
    s1.apply(op_c)
    s2.apply(op_rm)
    assert s1.text() == s2.text() == "cb"
    assert a not in s1.order()


def test_closure_pulls_in_references():
    a = WootrTriple("a", BEGIN, END)
    b = WootrTriple("b", a, END)
    assert wootr_closure([b]) == {a, b}
    assert wootr_order([b]) == [b]


def test_order_ignores_input_order():
    a = WootrTriple("a", BEGIN, END)
    b = WootrTriple("b", a, END)
    c = WootrTriple("c", BEGIN, a)
    assert wootr_order([b, c, a]) == wootr_order([a, b, c]) == [c, a, b]


# --- preconditions and combos ---


def test_insert_needs_ordered_neighbours():
    c = clock()
    s = WootrSequence("or", "op")
    s.gen_insert("a", BEGIN, END, c)
    a = s.order()[0]
    with pytest.raises(PreconditionViolation):
        s.gen_insert("x", END, BEGIN, c)
    with pytest.raises(PreconditionViolation):
        s.gen_insert("x", a, a, c)
    with pytest.raises(PreconditionViolation):
        s.gen_insert("x", WootrTriple("ghost", BEGIN, END), END, c)


def test_remove_missing_element_rejected():
    c = clock()
    s = WootrSequence("or", "op")
    with pytest.raises(PreconditionViolation):
        s.gen_remove(WootrTriple("x", BEGIN, END), c)


@pytest.mark.parametrize("kind", ["g", "2p"])
def test_add_only_kinds_rejected(kind):
    with pytest.raises(IllegalCombo):
        WootrSequence(kind, "op")


def test_insert_at_index_places_atom():
    c = clock()
    s = WootrSequence("or", "op")
    s.gen_insert_at("b", 0, c)
    s.gen_insert_at("a", 0, c)
    s.gen_insert_at("d", 2, c)
    s.gen_insert_at("c", 2, c)
    assert s.text() == "abcd"
    with pytest.raises(PreconditionViolation):
        s.gen_insert_at("x", 9, c)


def test_counter_kind_balances_add_remove():
    c1, c2 = clock("r1"), clock("r2")
    s1 = WootrSequence("c", "op")
    s2 = WootrSequence("c", "op")
    op_a = s1.gen_insert("a", BEGIN, END, c1)
    s2.apply(op_a)
    a = s1.order()[0]
    o1 = s1.gen_remove(a, c1)
    o2 = s2.gen_remove(a, c2)
    s1.apply(o2)
    s2.apply(o1)
    assert s1.text() == s2.text() == ""


def test_state_merge_both_directions():
    c1, c2 = clock("r1"), clock("r2")
    s1 = WootrSequence("lww", "state")
    s2 = WootrSequence("lww", "state")
    s1.gen_insert("a", BEGIN, END, c1)
    s2.gen_insert("b", BEGIN, END, c2)
    t1 = s1.copy()
    t1.merge(s2)
    t2 = s2.copy()
    t2.merge(s1)
    assert t1.text() == t2.text() == "ab"


# --- every causal delivery order agrees with the tombstone reference ---


def _legal_orders(n, deps):
    out = []

    def rec(prefix, done):
        if len(prefix) == n:
            out.append(tuple(prefix))
            return
        for i in range(n):
            if i not in done and deps[i] <= done:
                rec(prefix + [i], done | {i})

    rec([], set())
    return out


def test_every_delivery_order_matches_tombstone_reference():
    c1, c2, c3 = clock("r1"), clock("r2"), clock("r3")
    a = WootrTriple("a", BEGIN, END)
    s1 = WootrSequence("or", "op")
    op0 = s1.gen_insert("a", BEGIN, END, c1)
    op1 = s1.gen_insert("b", a, END, c1)
    s2 = WootrSequence("or", "op")
    s2.apply(op0)
    op2 = s2.gen_insert("c", BEGIN, END, c2)
    op3 = s2.gen_remove(a, c2)
    s3 = WootrSequence("or", "op")
    s3.apply(op0)
    op4 = s3.gen_insert("d", BEGIN, a, c3)
    ops = [op0, op1, op2, op3, op4]
    deps = [set(), {0}, {0}, {0, 2}, {0}]

    texts = set()
    orders = _legal_orders(len(ops), deps)
    assert len(orders) > 10
    for order in orders:
        obs = WootrSequence("or", "op")
        ref = TombstoneSequence()
        for i in order:
            obs.apply(ops[i])
            if ops[i].verb == ADD:
                ref.deliver(ops[i].element)
        assert ref.order(obs.elements.lookup()) == obs.order()
        texts.add(obs.text())
    assert texts == {"dbc"}


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_random_histories_match_tombstone_reference(seed):
    rng = random.Random(seed)
    replicas = ("r1", "r2")
    clocks = {r: ReplicaClock(r, seed) for r in replicas}
    seqs = {r: WootrSequence("or", "op") for r in replicas}
    log = []
    applied = {r: 0 for r in replicas}

    def sync(r):
        for origin, op in log[applied[r]:]:
            if origin != r:
                seqs[r].apply(op)
        applied[r] = len(log)

    for _ in range(14):
        r = rng.choice(replicas)
        s = seqs[r]
        if rng.random() < 0.25:
            sync(r)
            continue
        try:
            if s.order() and rng.random() < 0.3:
                op = s.gen_remove(rng.choice(s.order()), clocks[r])
            else:
                line = s.line()
                i = rng.randrange(len(line) - 1)
                op = s.gen_insert(
                    chr(97 + rng.randrange(6)), line[i], line[i + 1], clocks[r]
                )
        except PreconditionViolation:
            continue
        log.append((r, op))

    for r in replicas:
        sync(r)
    ref = TombstoneSequence()
    for _, op in log:
        if op.verb == ADD:
            ref.deliver(op.element)
    assert seqs["r1"].text() == seqs["r2"].text()
    assert ref.order(seqs["r1"].elements.lookup()) == seqs["r1"].order()

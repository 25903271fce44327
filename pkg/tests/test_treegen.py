import math
import re

import numpy as np
import pytest

from asymid.model import (
    CHANCE,
    DECISION,
    VALUE,
    Cpt,
    CptRow,
    InfluenceDiagram,
    State,
    ValueRow,
    ValueTable,
    Variable,
    consistent,
    effective_frame,
    enumerate_states,
    project,
)
from asymid.treegen import CHANCE_NODE, CHOICE_NODE, LEAF_NODE, build_tree, leaf_value, to_dot, tree_stats

from oracles import random_diagram

NODE_STATEMENT = re.compile(r"^\s+n\d+ \[", re.M)


@pytest.fixture(scope="module")
def pruned(used_car):
    return build_tree(used_car)


@pytest.fixture(scope="module")
def full(used_car):
    return build_tree(used_car, prune=False, use_framing=False)


def test_root_has_single_first_test_situation(pruned):
    root = pruned.root
    assert root.kind == CHANCE_NODE and root.state == State()
    assert len(root.children) == 1
    p, child = root.children[0]
    assert p == 1.0 and child.kind == CHOICE_NODE and child.decision == "T1"


def test_pruned_counts(pruned):
    t2 = pruned.choice_nodes("T2")
    assert len(t2) == 8
    assert sum(1 for n in t2 if len(n.children) == 1) == 6
    assert len(pruned.choice_nodes("B")) == 12


def test_unpruned_counts(full):
    assert len(full.choice_nodes("T2")) == 16
    assert len(full.choice_nodes("B")) == 96


def test_stats_pruned(pruned):
    s = pruned.stats
    assert (s["B"].reachable, s["T2"].reachable, s["T2"].singleton) == (12, 8, 6)
    assert s["T1"].reachable == 1
    for d in ("T1", "T2", "B"):
        assert s[d].reachable + s[d].pruned == s[d].total
        assert s[d].singleton <= s[d].reachable


def test_stats_unpruned(full):
    s = full.stats
    assert (s["B"].reachable, s["T2"].reachable) == (96, 16)
    assert all(s[d].singleton == 0 and s[d].pruned == 0 for d in ("T1", "T2", "B"))


def test_stats_recomputed_from_tree(pruned):
    assert tree_stats(pruned) == pruned.stats


def test_framing_alone_keeps_zero_probability_states(used_car):
    s = build_tree(used_car, prune=False).stats
    assert s["T2"].reachable == 16 and s["T2"].singleton == 12
    # 12 forced no-test states plus two alternatives at the four transmission states
    assert s["B"].reachable == (12 + 4 * 2) * 3


# -- leaf values -----------------------------------------------------------------


NO_TESTS = {"T1": "nt", "R1": "nr", "T2": "nt", "R2": "nr"}


def test_leaf_no_purchase_is_worth_nothing(used_car):
    assert leaf_value(used_car, {**NO_TESTS, "B": "ñ"}) == 0.0


def test_leaf_guarantee_without_tests(used_car):
    assert leaf_value(used_car, {**NO_TESTS, "B": "g"}) == pytest.approx(0.8 * 20 + 0.2 * 40, abs=1e-9)


def test_leaf_buy_after_steering_finds_a_defect(used_car):
    history = {"T1": "st", "R1": "one", "T2": "nt", "R2": "nr", "B": "b"}
    expected = 1100 - 1000 - 9 - (0.4 * 40 + 0.6 * 200)
    assert leaf_value(used_car, history) == pytest.approx(expected, abs=1e-9)
    assert expected == pytest.approx(-45)


def test_impossible_leaf_is_worth_zero(used_car):
    history = {"T1": "st", "R1": "two", "T2": "nt", "R2": "nr", "B": "b"}
    assert leaf_value(used_car, history) == 0.0


# -- structure -------------------------------------------------------------------


def _check_structure(diagram, tree, *, prune, use_framing, eps=0.0):
    order = diagram.decision_order
    for node in tree.nodes():
        if node.kind == CHANCE_NODE:
            probs = [p for p, _ in node.children]
            assert math.fsum(probs) == pytest.approx(1.0, abs=1e-9)
            for p, child in node.children:
                assert child.kind == CHOICE_NODE
                if prune:
                    assert p > eps
                assert consistent(child.state, node.state)
                assert set(child.state) == set(diagram.parents(child.decision))
                assert project(child.state, node.state) == node.state
            if not prune and node.children:
                d = node.children[0][1].decision
                new = [v for v in diagram.parents(d) if v not in node.state]
                assert len(node.children) == len(enumerate_states(diagram, new))
        elif node.kind == CHOICE_NODE:
            alts = [a for a, _ in node.children]
            if use_framing:
                assert tuple(alts) == effective_frame(diagram, node.decision, node.state)
            else:
                assert tuple(alts) == diagram.frame(node.decision)
            last = node.decision == order[-1]
            for _, child in node.children:
                assert child.kind == (LEAF_NODE if last else CHANCE_NODE)


@pytest.mark.parametrize("prune", [True, False])
@pytest.mark.parametrize("use_framing", [True, False])
def test_used_car_structure(used_car, prune, use_framing):
    tree = build_tree(used_car, prune=prune, use_framing=use_framing)
    _check_structure(used_car, tree, prune=prune, use_framing=use_framing)


def test_random_structures():
    rng = np.random.default_rng(7)
    for _ in range(40):
        d = random_diagram(rng)
        for prune in (True, False):
            for framing in (True, False):
                tree = build_tree(d, prune=prune, use_framing=framing)
                _check_structure(d, tree, prune=prune, use_framing=framing)


def test_pruning_never_grows_the_tree():
    rng = np.random.default_rng(11)
    for _ in range(40):
        d = random_diagram(rng)
        assert build_tree(d).node_count() <= build_tree(d, prune=False, use_framing=False).node_count()


def test_pruning_is_a_no_op_without_zeros_or_framing():
    rng = np.random.default_rng(13)
    for _ in range(20):
        d = random_diagram(rng, zero_prob=0.0, framing_prob=0.0)
        assert build_tree(d).node_count() == build_tree(d, prune=False, use_framing=False).node_count()


def test_positive_epsilon_renormalizes_and_flags(used_car):
    tree = build_tree(used_car, prune_epsilon=0.15)
    assert tree.approximate
    _check_structure(used_car, tree, prune=True, use_framing=True, eps=0.15)
    assert not build_tree(used_car).approximate


def test_epsilon_out_of_range(used_car):
    with pytest.raises(ValueError):
        build_tree(used_car, prune_epsilon=1.0)


def _single_decision(uniform=True):
    variables = (
        Variable("X", CHANCE, ("x0", "x1", "x2")),
        Variable("D", DECISION, ("a", "b")),
        Variable("U", VALUE),
    )
    arcs = frozenset({("X", "D"), ("X", "U"), ("D", "U")})
    probs = (1 / 3, 1 / 3, 1 / 3) if uniform else (0.5, 0.5, 0.0)
    cpts = {"X": Cpt("X", (), (CptRow((), probs),))}
    rows = (ValueRow((("X", "x0"), ("D", "a")), 1.0), ValueRow((("D", "b"),), 0.5), ValueRow((), 0.0))
    tables = {"U": ValueTable("U", ("X", "D"), rows)}
    return InfluenceDiagram("one", variables, arcs, cpts, tables, {}, ("D",))


def test_single_decision_with_uniform_parent():
    s = build_tree(_single_decision()).stats["D"]
    assert (s.reachable, s.pruned, s.total) == (3, 0, 3)


def test_single_decision_with_impossible_parent_value():
    s = build_tree(_single_decision(uniform=False)).stats["D"]
    assert (s.reachable, s.pruned, s.total) == (2, 1, 3)


def test_diagram_without_decisions_is_a_single_leaf():
    variables = (Variable("X", CHANCE, ("x0", "x1")), Variable("U", VALUE))
    d = InfluenceDiagram(
        "nodecision", variables, frozenset({("X", "U")}),
        {"X": Cpt("X", (), (CptRow((), (0.25, 0.75)),))},
        {"U": ValueTable("U", ("X",), (ValueRow((("X", "x0"),), 4.0), ValueRow((), 8.0)))},
        {}, (),
    )
    tree = build_tree(d)
    assert tree.root.kind == LEAF_NODE
    assert tree.root.value == pytest.approx(0.25 * 4 + 0.75 * 8)
    dot = to_dot(tree)
    assert len(NODE_STATEMENT.findall(dot)) == 1
    assert "7.00" in dot


# -- DOT -------------------------------------------------------------------------


def test_dot_has_twelve_purchase_boxes(pruned):
    dot = to_dot(pruned)
    assert len(re.findall(r'shape=box, label="B: ', dot)) == 12
    assert len(re.findall(r"shape=box", dot)) == 1 + 8 + 12


def test_dot_has_no_impossible_steering_result(pruned):
    dot = to_dot(pruned)
    assert "T1=st, R1=two" not in dot
    assert "T1=st, R1=zero" in dot


def test_dot_arc_labels(pruned):
    dot = to_dot(pruned)
    assert 'label="1.0000"' in dot
    assert 'label="f&e"' in dot
    assert re.search(r'label="-?\d+\.\d\d"', dot)


def test_dot_show_pruned_adds_grey_boxes(pruned):
    dot = to_dot(pruned, show_pruned=True)
    grey = len(re.findall(r"fillcolor=lightgray", dot))
    assert grey == sum(s.pruned for s in pruned.stats.decisions.values())
    assert "T1=st, R1=two" in dot


def test_dot_is_deterministic(used_car):
    assert to_dot(build_tree(used_car)) == to_dot(build_tree(used_car))

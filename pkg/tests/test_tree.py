import math
import random

import pytest

from treedual.errors import MalformedTree
from treedual.tree import (
    StoppingRegion,
    build_tree,
    constrained_region,
    expectation,
)
from treedual.scenario import fix_bin1, fix_det2


def bin1_tree():
    return build_tree([("root", None, 1.0), ("u", "root", 0.5), ("d", "root", 0.5)])


def test_single_root_degenerate_tree():
    t = build_tree([("only", None, 1.0)])
    assert t.horizon == 0
    assert t.leaves == ("only",)
    assert t.path_prob["only"] == 1.0


def test_bin1_tree_layout():
    t = bin1_tree()
    assert t.horizon == 1
    assert set(t.leaves) == {"u", "d"}
    assert t.path_prob["u"] == 0.5
    assert t.path_prob["d"] == 0.5


def test_bad_probability_sum_rejected():
    with pytest.raises(MalformedTree, match="sum"):
        build_tree([("r", None, 1.0), ("a", "r", 0.7), ("b", "r", 0.4)])


def test_orphan_and_duplicate_rejected():
    with pytest.raises(MalformedTree, match="unknown parent"):
        build_tree([("r", None, 1.0), ("a", "ghost", 1.0)])
    with pytest.raises(MalformedTree, match="duplicate"):
        build_tree([("r", None, 1.0), ("r", "r", 1.0)])


def test_ragged_leaves_rejected():
    with pytest.raises(MalformedTree, match="horizon"):
        build_tree([
            ("r", None, 1.0),
            ("a", "r", 0.5), ("b", "r", 0.5),
            ("aa", "a", 1.0),
        ])


def test_nonpositive_probability_rejected():
    with pytest.raises(MalformedTree):
        build_tree([("r", None, 1.0), ("a", "r", 0.0), ("b", "r", 1.0)])


def test_leaf_probabilities_sum_to_one_random():
    rng = random.Random(7)
    for _ in range(20):
        specs = [("r", None, 1.0)]
        frontier = ["r"]
        for depth in range(1, 4):
            nxt = []
            for nid in frontier:
                k = rng.randint(1, 3)
                raw = [rng.uniform(0.2, 1.0) for _ in range(k)]
                tot = sum(raw)
                for i, w in enumerate(raw):
                    cid = f"{nid}.{i}"
                    specs.append((cid, nid, w / tot))
                    nxt.append(cid)
            frontier = nxt
        t = build_tree(specs)
        assert math.isclose(sum(t.path_prob[l] for l in t.leaves), 1.0, abs_tol=1e-12)


def test_constrained_region_root_and_leaves():
    t = bin1_tree()
    assert constrained_region(t, StoppingRegion(frozenset({"root"}))) == {"root", "u", "d"}
    assert constrained_region(t, StoppingRegion(frozenset({"u", "d"}))) == {"u", "d"}


def test_constrained_region_mixed_depth2():
    t = build_tree([
        ("r", None, 1.0),
        ("u", "r", 0.5), ("d", "r", 0.5),
        ("uu", "u", 0.5), ("ud", "u", 0.5),
        ("du", "d", 0.5), ("dd", "d", 0.5),
    ])
    region = constrained_region(t, StoppingRegion(frozenset({"u", "du", "dd"})))
    assert region == {"u", "uu", "ud", "du", "dd"}


def test_region_always_contains_leaves_and_is_monotone():
    t = build_tree([
        ("r", None, 1.0),
        ("u", "r", 0.5), ("d", "r", 0.5),
        ("uu", "u", 0.5), ("ud", "u", 0.5),
        ("du", "d", 0.5), ("dd", "d", 0.5),
    ])
    small = constrained_region(t, StoppingRegion(frozenset({"uu", "ud", "du", "dd"})))
    mid = constrained_region(t, StoppingRegion(frozenset({"u", "du", "dd"})))
    big = constrained_region(t, StoppingRegion(frozenset({"r"})))
    assert set(t.leaves) <= small <= mid <= big


def test_stopping_region_antichain_enforced():
    t = bin1_tree()
    with pytest.raises(MalformedTree):
        StoppingRegion(frozenset({"root", "u"})).validate(t)
    with pytest.raises(MalformedTree):
        StoppingRegion(frozenset({"u"})).validate(t)  # path through d uncovered


def test_expectation_constant_and_density():
    s = fix_bin1()
    assert expectation(s.tree, 1.0, s.dkappa) == pytest.approx(1.0, abs=1e-12)
    z = {"root": 1.0, "u": 2 / 3, "d": 4 / 3}
    assert expectation(s.tree, z, s.dkappa) == pytest.approx(1.0, abs=1e-12)


def test_expectation_det2_budget_value():
    # Hand KKT for FIX-DET2: marginal utilities (sqrt(10), 1) against the
    # optimal consumption (0.1, 1.0), unit clock weights.
    s = fix_det2()
    yhat = {"t0": 0.0, "t1": math.sqrt(10.0), "t2": 1.0}
    chat = {"t0": 0.0, "t1": 0.1, "t2": 1.0}
    prod = {n: yhat[n] * chat[n] for n in s.tree.order}
    got = expectation(s.tree, prod, s.dkappa)
    assert got == pytest.approx(0.1 * math.sqrt(10.0) + 1.0, abs=1e-12)
    assert got == pytest.approx(1.31623, abs=5e-6)


def test_expectation_linear_in_process():
    rng = random.Random(3)
    s = fix_bin1()
    for _ in range(25):
        a = {n: rng.uniform(-2, 2) for n in s.tree.order}
        b = {n: rng.uniform(-2, 2) for n in s.tree.order}
        lam = rng.uniform(-3, 3)
        combo = {n: a[n] + lam * b[n] for n in s.tree.order}
        lhs = expectation(s.tree, combo, s.dkappa)
        rhs = expectation(s.tree, a, s.dkappa) + lam * expectation(s.tree, b, s.dkappa)
        assert lhs == pytest.approx(rhs, abs=1e-12)

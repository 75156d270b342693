import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import all_binary, instances
from valuenet import FollowerOracle, Hyperrectangle, MergePolicy, build_approx, merge_rects, shift_rect
from valuenet.approx import prune_infeasible_rect, terminal_boxes
from valuenet.catalog import merge_instance, reduction_instance
from valuenet.network import find_symmetric_pair


def merge_selector(layer, boxes, lps):
    """Grouping of the worked merge example: keep (-3,-5) apart on layer 2, pair up layer 3."""
    if layer == 2:
        alone = [b.lo for b in boxes].index((-3, -5))
        return [[i for i in range(len(boxes)) if i != alone], [alone]]
    return [[0, 1], [2, 3]]


def test_box_operations():
    r = Hyperrectangle((-1, -2), (0, 0))
    assert shift_rect(r, (-3, 1), 1) == Hyperrectangle((-4, -1), (-3, 1))
    assert shift_rect(r, (-3, 1), 0) is r
    assert merge_rects(r, Hyperrectangle.point((-5, 3))) == Hyperrectangle((-5, -2), (0, 3))
    assert r.contains((-1, 0)) and not r.contains((1, 0))
    with pytest.raises(ValueError):
        Hyperrectangle((1,), (0,))


def test_prune_uses_upper_corner():
    inst = merge_instance()
    assert prune_infeasible_rect(inst, Hyperrectangle((-20, -20), (-11, 0)))
    assert not prune_infeasible_rect(inst, Hyperrectangle((-20, -20), (-10, 0)))
    assert not prune_infeasible_rect(inst, Hyperrectangle((-20, -20), (-11, 0)), slack=(1, 0))


def test_merge_example_boxes_and_values():
    net = build_approx(merge_instance(), MergePolicy(budget=2, selector=merge_selector), reduce_output=False)
    assert net.widths == (1, 2, 2, 2)
    layer2 = [a[0] for a in net.annotations[2]]
    assert Hyperrectangle((-2, -3), (0, 0)) in layer2
    assert Hyperrectangle((-3, -5), (-3, -5)) in layer2
    boxes = [terminal_boxes(net, t)[0] for t in range(net.num_terminals)]
    assert boxes[0] == Hyperrectangle((-5, -4), (0, 0))
    assert net.values == [0.0, 0.0]


def test_merge_example_reduces_to_a_chain():
    net = build_approx(merge_instance(), MergePolicy(budget=2, selector=merge_selector))
    assert net.widths == (1, 1, 1, 1)
    assert net.values == [0.0]


def test_large_budget_is_exact():
    net = build_approx(reduction_instance(), MergePolicy(budget=100))
    assert net.widths == (1, 2, 2, 3)


def test_selector_must_partition():
    bad = MergePolicy(budget=2, selector=lambda layer, boxes, lps: [[0]])
    with pytest.raises(ValueError):
        build_approx(merge_instance(), bad)


def test_policy_validation():
    with pytest.raises(ValueError):
        MergePolicy(budget=0)
    with pytest.raises(ValueError):
        MergePolicy(strategy="random")


def audit(inst, net, oracle):
    """Every follower-feasible x has a path whose value is at least phi(x)."""
    X = np.array(all_binary(inst.n_l))
    vals = net.lookup_many(X)
    for x, v in zip(X, vals):
        phi = oracle.phi(x)
        if phi.feasible:
            assert v >= phi.value, (tuple(x), v, phi.value)


@given(instances(), st.integers(1, 4), st.sampled_from(["longest_path", "first_pair"]), st.booleans())
def test_approx_bounds_phi(inst, budget, strategy, reduced):
    oracle = FollowerOracle(inst)
    net = build_approx(inst, MergePolicy(budget=budget, strategy=strategy), oracle, reduce_output=reduced)
    assert max(net.meta["widths_before_reduce"]) <= budget
    assert max(net.widths) <= budget
    audit(inst, net, oracle)
    if reduced:
        assert find_symmetric_pair(net) is None


@given(instances())
def test_unbounded_budget_matches_phi(inst):
    oracle = FollowerOracle(inst)
    net = build_approx(inst, MergePolicy(budget=None), oracle)
    for x in all_binary(inst.n_l):
        phi = oracle.phi(x)
        if phi.feasible:
            assert net.lookup(x) == phi.value


def test_fallback_value_for_half_feasible_boxes():
    # one row, state in {-4, 0}: -4 admits no response, 0 does
    from valuenet import BilevelInstance
    inst = BilevelInstance.create(c=[1, 1], p=[1], d=[-3], A=[[-2, -2]], B=[[1]], b=[-1])
    net = build_approx(inst, MergePolicy(budget=1), fallback_value=99.0, reduce_output=False)
    assert net.meta["fallback_terminals"] == 1
    assert net.values == [99.0]
    assert math.isinf(FollowerOracle(inst).phi((1, 1)).value)

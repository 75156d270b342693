import math

import numpy as np
import pytest
from hypothesis import given

from conftest import all_binary, instances
from valuenet import FollowerOracle, build_state_network, find_symmetric_pair, isomorphic, lookup_value, reduce
from valuenet.catalog import reduction_instance
from valuenet.network import (NetworkTooLarge, ValueNetwork, canonical_form, enumerate_state_layers,
                              merge_equal_terminals, minimal_widths, network_stats, prune, to_dot,
                              variable_order)

# reachable states and follower values of the reduction example, derived by hand
TERMINAL_STATES = [(0, 0), (-1, -2), (-1, 0), (-2, -2), (-2, 0), (-3, -2)]
TERMINAL_VALUES = [-5.0, -2.0, -5.0, 0.0, -5.0, 0.0]


def test_state_network_layers():
    net = build_state_network(reduction_instance())
    assert net.widths == (1, 2, 3, 6)
    states = [a[0] for a in net.annotations[3]]
    assert states == TERMINAL_STATES
    assert net.values == TERMINAL_VALUES


def test_reduced_network_shape():
    net = reduce(build_state_network(reduction_instance()))
    assert net.widths == (1, 2, 2, 3)
    assert net.num_nodes == 8
    assert sorted(net.values) == [-5.0, -2.0, 0.0]
    assert lookup_value(net, (1, 1, 0)) == -5.0


def test_lookup_matches_follower_everywhere():
    inst = reduction_instance()
    net = reduce(build_state_network(inst))
    oracle = FollowerOracle(inst)
    for x in all_binary(3):
        assert net.lookup(x) == oracle.phi(x).value


def test_terminal_merge_leaves_a_symmetric_pair():
    net = merge_equal_terminals(build_state_network(reduction_instance()))
    assert find_symmetric_pair(net) == ((2, 1), (2, 2))
    assert find_symmetric_pair(reduce(net)) is None


def test_reduce_merges_annotations():
    net = reduce(build_state_network(reduction_instance()))
    merged = [set(a) for a in net.annotations[3]]
    assert {(0, 0), (-1, 0), (-2, 0)} in merged


def test_node_cap():
    with pytest.raises(NetworkTooLarge):
        build_state_network(reduction_instance(), node_cap=5)


def test_variable_orders():
    inst = reduction_instance()
    assert variable_order(inst) == (0, 1, 2)
    # column sums -1, -1, -3 sorted ascending
    assert variable_order(inst, "coef_sum") == (2, 0, 1)
    with pytest.raises(ValueError):
        variable_order(inst, "random")


def test_prune_drops_dead_nodes():
    arcs = [np.array([[0, 1]]), np.array([[0, -1], [-1, -1]])]
    net = prune(ValueNetwork(arcs, [3.0], (0, 1)))
    assert net.widths == (1, 1, 1)
    assert net.lookup((0, 0)) == 3.0 and math.isinf(net.lookup((1, 0)))


def test_dot_export_styles():
    text = to_dot(reduce(build_state_network(reduction_instance())), "ex")
    assert text.startswith('digraph "ex"')
    assert "style=dashed" in text and "style=solid" in text


def test_stats_report_reduction():
    raw = build_state_network(reduction_instance())
    stats = network_stats(reduce(raw), raw)
    assert stats["nodes"] == 8 and stats["nodes_before_reduce"] == 12
    assert stats["reduction_ratio"] == pytest.approx(1 / 3)


@given(instances())
def test_exact_network_encodes_phi(inst):
    oracle = FollowerOracle(inst)
    net = build_state_network(inst, oracle)
    X = np.array(all_binary(inst.n_l))
    want = np.array([oracle.phi(x).value for x in X])
    assert np.array_equal(net.lookup_many(X), want)
    assert np.array_equal(reduce(net).lookup_many(X), want)


@given(instances())
def test_reduce_is_minimal_and_idempotent(inst):
    net = reduce(build_state_network(inst))
    assert find_symmetric_pair(net) is None
    assert net.widths == minimal_widths(net)
    again = reduce(net)
    assert isomorphic(net, again)
    assert canonical_form(net) == canonical_form(again)


@given(instances())
def test_state_layers_keep_only_completable_states(inst):
    oracle = FollowerOracle(inst)
    layers = enumerate_state_layers(inst, oracle)
    assert set(layers[-1]) == {inst.state(x) for x in all_binary(inst.n_l) if oracle.phi(x).feasible}


@given(instances())
def test_coef_sum_order_encodes_same_function(inst):
    oracle = FollowerOracle(inst)
    a = build_state_network(inst, oracle)
    b = build_state_network(inst, oracle, variable_order(inst, "coef_sum"))
    X = np.array(all_binary(inst.n_l))
    assert np.array_equal(a.lookup_many(X), b.lookup_many(X))

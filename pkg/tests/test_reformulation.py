import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import all_binary, instances, mixed_instance
from valuenet import (BlockingCutState, FollowerOracle, MergePolicy, add_blocking_cut, build_approx,
                      build_flow_polytope, build_hpr, build_indicator_bilevel, build_state_network,
                      build_strengthened, compute_big_m, reduce)
from valuenet.catalog import indicator_gap_instance, reduction_instance
from valuenet.milp import solve_lp, solve_milp
from valuenet.oracle import brute_force_bilevel


def fix(model, var, value):
    model.variables[var].lb = model.variables[var].ub = float(value)


def exact_net(inst, oracle=None):
    return reduce(build_state_network(inst, oracle))


def test_indicator_lp_gap():
    inst = indicator_gap_instance()
    bm = build_indicator_bilevel(inst)
    assert solve_lp(bm.model.relaxed()).objective == pytest.approx(0.5, abs=1e-6)
    assert solve_milp(bm.model).objective == pytest.approx(100.0, abs=1e-6)


def test_flow_model_closes_indicator_gap():
    inst = indicator_gap_instance()
    bm = build_strengthened(inst, exact_net(inst))
    assert solve_lp(bm.model.relaxed()).objective == pytest.approx(100.0, abs=1e-6)
    sol = solve_milp(bm.model)
    assert sol.objective == pytest.approx(100.0, abs=1e-6)
    assert bm.split(sol.x)[0] == (0, 1)


@pytest.mark.parametrize("seed", range(12))
def test_flow_fragment_size(seed):
    inst = mixed_instance(seed)
    net = exact_net(inst)
    if net.is_empty:
        pytest.skip("no reachable state")
    poly = build_flow_polytope(net)
    assert poly.num_flow_vars == net.num_edges
    assert poly.num_rows == net.num_nodes + inst.n_l + 1


def test_empty_network_gives_infeasible_model():
    from valuenet.network import empty_network
    poly = build_flow_polytope(empty_network(2))
    assert poly.infeasible
    assert solve_lp(poly.model).status.value == "Infeasible"


@settings(max_examples=40)
@given(instances(max_l=5))
def test_fixing_x_pins_z_to_network_value(inst):
    net = exact_net(inst)
    if net.is_empty:
        return
    for x in all_binary(inst.n_l):
        poly = build_flow_polytope(net)
        for var, v in zip(poly.x_vars, x):
            fix(poly.model, var, v)
        sol = solve_lp(poly.model)
        value = net.lookup(x)
        if math.isinf(value):
            assert sol.status.value == "Infeasible"
        else:
            assert sol.value(poly.z_var) == pytest.approx(value, abs=1e-7)


@settings(max_examples=40)
@given(instances(max_l=5), st.integers(0, 2**31))
def test_flow_lp_vertices_are_integral(inst, seed):
    net = exact_net(inst)
    if net.is_empty:
        return
    r = np.random.default_rng(seed)
    poly = build_flow_polytope(net, relax_x=True)
    terms = [(v, float(r.normal())) for v in poly.x_vars] + [(poly.z_var, float(r.normal()))]
    poly.model.set_objective(terms)
    sol = solve_lp(poly.model)
    assert sol.optimal
    x = np.array([sol.value(v) for v in poly.x_vars])
    assert np.allclose(x, np.round(x), atol=1e-7)
    assert sol.value(poly.z_var) == pytest.approx(net.lookup(tuple(int(round(v)) for v in x)), abs=1e-6)


@pytest.mark.parametrize("seed", range(15))
def test_indicator_and_flow_milps_agree(seed):
    inst = mixed_instance(seed)
    oracle = FollowerOracle(inst)
    a = solve_milp(build_indicator_bilevel(inst, oracle).model)
    b = solve_milp(build_strengthened(inst, exact_net(inst, oracle)).model)
    assert a.status == b.status
    if a.optimal:
        assert a.objective == pytest.approx(b.objective, abs=1e-6)


@pytest.mark.parametrize("seed", range(15))
def test_relaxation_chain(seed):
    inst = mixed_instance(seed)
    oracle = FollowerOracle(inst)
    hpr = solve_milp(build_hpr(inst).model)
    exact = solve_milp(build_strengthened(inst, exact_net(inst, oracle)).model)
    truth = brute_force_bilevel(inst)
    value = lambda s: s.objective if s.optimal else math.inf
    assert value(hpr) <= value(exact) + 1e-6
    for budget in (1, 2):
        approx = solve_milp(build_strengthened(inst, build_approx(inst, MergePolicy(budget=budget), oracle)).model)
        assert value(hpr) <= value(approx) + 1e-6 <= value(exact) + 2e-6
    assert value(exact) == pytest.approx(truth.value, abs=1e-6)


@pytest.mark.parametrize("seed", range(20))
def test_big_m_bounds_every_follower_value(seed):
    inst = mixed_instance(seed)
    oracle = FollowerOracle(inst)
    res = compute_big_m(inst, oracle=oracle)
    phis = [oracle.phi(x) for x in all_binary(inst.n_l)]
    feasible = [p.value for p in phis if p.feasible]
    if feasible:
        assert res.value >= max(feasible) - 1e-9
    assert len(set(res.samples)) == len(res.samples)


def test_blocking_cut_forces_better_response():
    inst = reduction_instance()
    bm = build_hpr(inst)
    state = BlockingCutState(inst, compute_big_m(inst).value)
    assert add_blocking_cut(bm, state, (1, 0))
    for var, v in zip(bm.x, (1, 1, 0)):
        fix(bm.model, var, v)
    bm.model.set_objective([(v, -float(c)) for v, c in zip(bm.y, inst.d)])
    sol = solve_milp(bm.model)
    assert -sol.objective == pytest.approx(-5.0)


def test_blocking_cut_relaxes_when_response_infeasible():
    inst = reduction_instance()
    bm = build_hpr(inst)
    state = BlockingCutState(inst, compute_big_m(inst).value)
    add_blocking_cut(bm, state, (1, 0))
    # at x = (0, 0, 1) the response (1, 0) violates the second row, so the optimal y = (1, 1) with d.y = -2 stays allowed
    for var, v in zip(bm.x, (0, 0, 1)):
        fix(bm.model, var, v)
    for var, v in zip(bm.y, (1, 1)):
        fix(bm.model, var, v)
    assert solve_milp(bm.model).optimal


def test_duplicate_cut_warns():
    inst = reduction_instance()
    bm = build_hpr(inst)
    state = BlockingCutState(inst, 0.0)
    add_blocking_cut(bm, state, (0, 1))
    rows = bm.model.num_constraints
    with pytest.warns(RuntimeWarning):
        assert not add_blocking_cut(bm, state, (0, 1))
    assert bm.model.num_constraints == rows
    assert state.registered == [(0, 1)]


@settings(max_examples=30)
@given(instances(max_l=4, max_f=3))
def test_cuts_keep_bilevel_feasible_points(inst):
    oracle = FollowerOracle(inst)
    big = compute_big_m(inst, oracle=oracle).value
    ys = [tuple(y) for y in all_binary(inst.n_f)]
    for x in all_binary(inst.n_l):
        phi = oracle.phi(x)
        if not phi.feasible:
            continue
        bm = build_hpr(inst)
        state = BlockingCutState(inst, big)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            for y_hat in ys:
                add_blocking_cut(bm, state, y_hat)
        for var, v in zip(bm.x, x):
            fix(bm.model, var, v)
        for var, v in zip(bm.y, phi.y):
            fix(bm.model, var, v)
        # leader rows may exclude x, so compare against the plain relaxation
        plain = build_hpr(inst)
        for var, v in zip(plain.x + plain.y, x + phi.y):
            fix(plain.model, var, v)
        assert solve_milp(bm.model).optimal == solve_milp(plain.model).optimal

import json
import math

import pytest

from conftest import mixed_instance, scaled_generator_instance
from valuenet import FollowerOracle, SolvePolicy, check_bilevel_feasible, solve_exact, solve_relaxation
from valuenet.catalog import indicator_gap_instance, merge_instance, reduction_instance
from valuenet.oracle import brute_force_bilevel
from valuenet.solver import integer_gap

LOOSE = SolvePolicy(budget=1, strengthen=False, initial_cuts=False)


def test_integer_gap():
    assert integer_gap(100.0, 100.0) == 0.0
    assert integer_gap(-10.0, -20.0) == pytest.approx(1.0)
    assert integer_gap(0.0, -1.0) == math.inf
    assert integer_gap(0.0, 0.0) == 0.0
    assert integer_gap(5.0, -math.inf) == math.inf
    assert integer_gap(None, 1.0) is None


def test_check_bilevel_feasible_on_reduction_instance():
    inst = reduction_instance()
    assert check_bilevel_feasible(inst, (1, 1, 1), (0, 0))
    # feasible for the follower rows but not optimal: phi(1, 1, 0) = -5
    assert not check_bilevel_feasible(inst, (1, 1, 0), (1, 1))
    assert not check_bilevel_feasible(inst, (1, 1), (0, 0))
    assert not check_bilevel_feasible(inst, (1, 1, 2), (0, 0))


@pytest.mark.parametrize("name,make,value", [
    ("indicator_gap", indicator_gap_instance, 100.0),
    ("reduction", reduction_instance, -6.0),
    ("merge", merge_instance, -3.0),
])
def test_catalog_optima(name, make, value):
    for policy in (SolvePolicy(), SolvePolicy(budget=None), LOOSE):
        rep = solve_exact(make(), policy)
        assert rep.status == "Optimal"
        assert rep.objective == pytest.approx(value, abs=1e-6)
        assert check_bilevel_feasible(make(), rep.x, rep.y)


@pytest.mark.parametrize("seed", range(30))
def test_solve_exact_matches_oracle(seed):
    inst = mixed_instance(seed)
    truth = brute_force_bilevel(inst)
    oracle = FollowerOracle(inst)
    for policy in (LOOSE, SolvePolicy(budget=2)):
        rep = solve_exact(inst, policy, oracle=oracle)
        if not truth.feasible:
            assert rep.status == "Infeasible" and rep.objective is None
            continue
        assert rep.status == "Optimal"
        assert rep.objective == pytest.approx(truth.value, abs=1e-6)
        assert check_bilevel_feasible(inst, rep.x, rep.y, oracle=oracle)
        lbs = [row["lower_bound"] for row in rep.log]
        assert lbs == sorted(lbs)


@pytest.mark.parametrize("seed", range(8))
def test_generator_instances_match_oracle(seed):
    inst = scaled_generator_instance(seed)
    truth = brute_force_bilevel(inst)
    rep = solve_exact(inst, known_optimum=truth.value if truth.feasible else None)
    if truth.feasible:
        assert rep.objective == truth.value
        assert rep.gap == 0.0 and rep.gap_reference == "known"
    else:
        assert rep.status == "Infeasible"


def test_iteration_limit_is_reported():
    inst = mixed_instance(43)
    rep = solve_exact(inst, SolvePolicy(budget=1, strengthen=False, initial_cuts=False, max_iterations=1))
    assert rep.status == "LimitReached"
    assert "iteration limit" in rep.message
    assert rep.lower_bound <= brute_force_bilevel(inst).value + 1e-9


def test_relaxation_chain_and_incumbent():
    inst = mixed_instance(4)
    truth = brute_force_bilevel(inst).value
    hpr = solve_relaxation(inst, "hpr")
    dd = solve_relaxation(inst, "dd", SolvePolicy(budget=1))
    ddm = solve_relaxation(inst, "ddmaxmin", SolvePolicy(budget=1))
    exact = solve_relaxation(inst, "dd", SolvePolicy(budget=None))
    assert hpr.lower_bound <= dd.lower_bound + 1e-9 <= ddm.lower_bound + 2e-9 <= truth + 3e-9
    assert exact.lower_bound == pytest.approx(truth)
    for rep in (hpr, dd, ddm, exact):
        if rep.objective is not None:
            assert rep.objective >= truth - 1e-9
            assert check_bilevel_feasible(inst, rep.x, rep.y)


def test_unknown_variant():
    with pytest.raises(ValueError):
        solve_relaxation(reduction_instance(), "lp")


def test_report_serialization():
    rep = solve_exact(mixed_instance(43), LOOSE)
    data = json.loads(rep.to_json())
    assert data["status"] == "Optimal"
    assert data["iterations"] == rep.iterations == len(rep.log) - 1
    assert isinstance(data["x"], list)
    lines = rep.log_tsv().splitlines()
    assert lines[0].split("\t") == ["iter", "lower_bound", "incumbent", "phi", "cut_added"]
    assert len(lines) == len(rep.log) + 1
    assert lines[-1].split("\t")[4] == "0"


def test_infeasible_report_serializes_infinity():
    from valuenet import BilevelInstance
    inst = BilevelInstance.create(c=[1], p=[1], d=[1], A=[[1]], B=[[1]], b=[3])
    rep = solve_exact(inst)
    assert rep.status == "Infeasible"
    assert json.loads(rep.to_json())["lower_bound"] == "inf"


def test_network_report_uses_exact_states():
    rep = solve_exact(reduction_instance(), SolvePolicy(budget=None))
    assert rep.network["widths"] == [1, 2, 2, 3]
    assert check_bilevel_feasible(reduction_instance(), rep.x, rep.y)

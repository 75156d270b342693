import math

import pytest
from hypothesis import given

from conftest import all_binary, instances
from valuenet import FollowerOracle, eval_phi, eval_phibar, phi_identity_check
from valuenet.catalog import merge_instance, reduction_instance
from valuenet.follower import state_floor


def test_reduction_example_value():
    inst = reduction_instance()
    res = eval_phi(inst, (1, 1, 0))
    assert res.value == -5.0 and res.y == (1, 0)


def test_merge_example_values():
    inst = merge_instance()
    res = eval_phi(inst, (0, 1, 0))
    assert res.value == -200.0 and res.y == (1, 1)
    res = eval_phibar(inst, (-5, -4))
    assert res.value == 0.0 and res.y == (0, 0)


def test_infeasible_state():
    inst = merge_instance()
    res = eval_phibar(inst, (-20, 0))
    assert not res.feasible and math.isinf(res.value)


def test_state_floor():
    assert state_floor(merge_instance()).tolist() == [-10, -10]


def test_state_dimension_checked():
    with pytest.raises(ValueError):
        FollowerOracle(reduction_instance()).phibar((0,))


@given(instances(max_l=4, max_f=4))
def test_milp_path_matches_enumeration(inst):
    enum = FollowerOracle(inst)
    milp = FollowerOracle(inst, enumeration_limit=0)
    for x in all_binary(inst.n_l):
        a, b = enum.phi(x), milp.phi(x)
        assert a.value == b.value
        # both break ties toward the lexicographically smallest response
        assert a.y == b.y


@given(instances(max_l=4))
def test_equal_states_give_equal_values(inst):
    oracle = FollowerOracle(inst)
    xs = all_binary(inst.n_l)
    for x1 in xs:
        for x2 in xs:
            if phi_identity_check(inst, x1, x2):
                assert oracle.phi(x1) == oracle.phi(x2)


def test_phibar_table():
    oracle = FollowerOracle(reduction_instance())
    assert oracle.phibar_table([[0, 0], [-1, -2]]).tolist() == [-5.0, -2.0]

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from valuenet.milp import Limits, MilpModel, Status, solve_lp, solve_milp, to_lp_format


def enumerate_binary(model):
    """Reference optimum of a pure-binary model."""
    best = math.inf
    for bits in itertools.product((0, 1), repeat=model.num_vars):
        x = np.array(bits, dtype=float)
        if not model.violations(x):
            best = min(best, model.evaluate(x))
    return best


def random_model(seed, n=6, rows=4):
    r = np.random.default_rng(seed)
    model = MilpModel(f"rand{seed}")
    xs = [model.add_var(f"x{k}", binary=True, obj=float(r.integers(-9, 10))) for k in range(n)]
    for i in range(rows):
        sense = ("<=", ">=", "==")[int(r.integers(0, 3))] if i else "<="
        coef = r.integers(-5, 6, n).astype(float)
        rhs = float(r.integers(-4, 8)) if sense != "==" else float(coef[: n // 2].clip(0).sum())
        model.add_constr(zip(xs, coef), sense, rhs)
    return model


@pytest.mark.parametrize("seed", range(40))
def test_backends_agree_with_enumeration(seed):
    model = random_model(seed)
    ref = enumerate_binary(model)
    for backend in ("native", "highs"):
        sol = solve_milp(model, backend=backend)
        if math.isinf(ref):
            assert sol.status is Status.INFEASIBLE
        else:
            assert sol.optimal
            assert sol.objective == pytest.approx(ref, abs=1e-7)
            assert not model.violations(sol.x)


@settings(max_examples=40)
@given(st.integers(0, 10_000))
def test_lp_backends_agree(seed):
    r = np.random.default_rng(seed)
    model = MilpModel()
    xs = [model.add_var(lb=0.0, ub=float(r.integers(1, 4)), obj=float(r.integers(-5, 6))) for _ in range(5)]
    for _ in range(3):
        model.add_constr(zip(xs, r.integers(-3, 4, 5).astype(float)), "<=", float(r.integers(0, 6)))
    a, b = solve_lp(model, "native"), solve_lp(model, "highs")
    assert a.status == b.status
    if a.optimal:
        assert a.objective == pytest.approx(b.objective, abs=1e-7)


def test_lp_duals_certify_optimum():
    model = MilpModel()
    x = model.add_var("x", 0, math.inf, obj=-1)
    y = model.add_var("y", 0, math.inf, obj=-2)
    model.add_constr([(x, 1), (y, 1)], "<=", 4)
    model.add_constr([(x, 1), (y, 3)], "<=", 6)
    sol = solve_lp(model, "native")
    assert sol.objective == pytest.approx(-5.0)
    assert float(sol.duals @ np.array([4.0, 6.0])) == pytest.approx(-5.0)


def test_unbounded_and_infeasible():
    model = MilpModel()
    x = model.add_var("x", -math.inf, math.inf, obj=1)
    assert solve_lp(model, "native").status is Status.UNBOUNDED
    assert solve_lp(model, "highs").status is Status.UNBOUNDED
    model = MilpModel()
    x = model.add_var("x", binary=True)
    model.add_constr([(x, 1)], ">=", 2)
    for backend in ("native", "highs"):
        assert solve_milp(model, backend=backend).status is Status.INFEASIBLE


def test_contradictory_bounds_short_circuit():
    model = MilpModel()
    model.add_var("x", 2, 1)
    assert solve_milp(model).status is Status.INFEASIBLE


def test_node_limit_reports_limit():
    model = random_model(3, n=14, rows=6)
    sol = solve_milp(model, Limits(node_limit=1), backend="native")
    assert sol.status in (Status.LIMIT_REACHED, Status.OPTIMAL, Status.INFEASIBLE)


def test_degenerate_lp_terminates():
    # many ties in the ratio test
    model = MilpModel()
    xs = [model.add_var(lb=0, ub=1, obj=-1) for _ in range(6)]
    for i in range(6):
        model.add_constr([(xs[i], 1), (xs[(i + 1) % 6], 1)], "<=", 1)
    assert solve_lp(model, "native").objective == pytest.approx(-3.0)


def test_lp_format_lists_sections():
    model = random_model(1)
    text = to_lp_format(model)
    for token in ("Minimize", "Subject To", "Bounds", "Binaries", "End"):
        assert token in text


def test_highs_agrees_with_native_on_presolve_trap():
    # HiGHS presolve once certified a suboptimal point (-657) on this model
    from conftest import scaled_generator_instance
    from valuenet import build_state_network, build_strengthened, reduce
    inst = scaled_generator_instance(41)
    model = build_strengthened(inst, reduce(build_state_network(inst))).model
    assert solve_milp(model, backend="highs").objective == solve_milp(model, backend="native").objective == -778.0

"""Adapter that runs a MilpModel through the HiGHS solver bundled with SciPy."""

from __future__ import annotations

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .model import INT_TOL, Limits, MilpModel, MilpSolution, Sense, Status


def _checked(model: MilpModel, x: np.ndarray, integral: bool, **extra) -> MilpSolution:
    if integral:
        mask = model.binary_mask()
        x = x.copy()
        if np.any(np.abs(x[mask] - np.round(x[mask])) > INT_TOL):
            return MilpSolution(Status.NUMERICAL_ERROR, message="fractional binary in HiGHS answer")
        x[mask] = np.round(x[mask])
    problems = model.violations(x, integrality=integral)
    if problems:
        return MilpSolution(Status.NUMERICAL_ERROR, message="HiGHS answer violates " + problems[0])
    obj = model.evaluate(x)
    extra.setdefault("bound", obj)
    return MilpSolution(Status.OPTIMAL, objective=obj, x=x, **extra)


def solve_lp_highs(model: MilpModel) -> MilpSolution:
    c = model.cost_vector()
    lb, ub = model.bounds()
    if model.num_vars == 0:
        return MilpSolution(Status.OPTIMAL, objective=model.obj_constant, x=np.zeros(0), bound=model.obj_constant)
    M = model.matrix()
    le = [r for r, con in enumerate(model.constraints) if con.sense is not Sense.EQ]
    eq = [r for r, con in enumerate(model.constraints) if con.sense is Sense.EQ]
    sign = np.array([1.0 if model.constraints[r].sense is Sense.LE else -1.0 for r in le])
    rhs = np.array([con.rhs for con in model.constraints])
    kwargs = {}
    if le:
        kwargs["A_ub"] = M[le].multiply(sign[:, None]).tocsr()
        kwargs["b_ub"] = rhs[le] * sign
    if eq:
        kwargs["A_eq"] = M[eq]
        kwargs["b_eq"] = rhs[eq]
    res = linprog(c, bounds=list(zip(lb, ub)), method="highs", **kwargs)
    if res.status == 2:
        return MilpSolution(Status.INFEASIBLE, message=res.message)
    if res.status == 3:
        return MilpSolution(Status.UNBOUNDED, message=res.message)
    if res.status != 0:
        return MilpSolution(Status.NUMERICAL_ERROR, message=res.message)
    duals = np.zeros(model.num_constraints)
    if le:
        duals[le] = res.ineqlin.marginals * sign
    if eq:
        duals[eq] = res.eqlin.marginals
    # strong duality with the reported multipliers doubles as a complementary-slackness check
    dual_obj = float(duals @ rhs)
    dual_obj += float(np.where(np.isfinite(lb), lb, 0.0) @ res.lower.marginals)
    dual_obj += float(np.where(np.isfinite(ub), ub, 0.0) @ res.upper.marginals)
    if abs(dual_obj - res.fun) > 1e-6 * (1.0 + abs(res.fun)):
        return MilpSolution(Status.NUMERICAL_ERROR, message="duality gap at HiGHS optimum")
    return _checked(model, np.asarray(res.x, dtype=float), False, duals=duals)


def solve_milp_highs(model: MilpModel, limits: Limits | None = None, presolve: bool = False) -> MilpSolution:
    """Solve with HiGHS; presolve stays off unless asked for.

    With presolve on, the HiGHS build in SciPy 1.15 has returned points that
    violate a row and, worse, feasible points it wrongly certified optimal.
    A presolved answer that fails the feasibility check is retried without it.
    """
    sol = _solve_milp_highs(model, limits, presolve=presolve)
    if presolve and sol.status is Status.NUMERICAL_ERROR:
        sol = _solve_milp_highs(model, limits, presolve=False)
    return sol


def _solve_milp_highs(model: MilpModel, limits: Limits | None, presolve: bool) -> MilpSolution:
    limits = limits or Limits()
    if model.num_vars == 0:
        return solve_lp_highs(model)
    lb, ub = model.bounds()
    lo, hi = model.row_bounds()
    options = {"mip_rel_gap": 1e-9, "presolve": presolve}
    if limits.time_limit is not None:
        options["time_limit"] = float(limits.time_limit)
    if limits.node_limit is not None:
        options["node_limit"] = int(limits.node_limit)
    constraints = [LinearConstraint(model.matrix(), lo, hi)] if model.num_constraints else []
    res = milp(model.cost_vector(), integrality=model.binary_mask().astype(int), bounds=Bounds(lb, ub),
               constraints=constraints, options=options)
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    bound = getattr(res, "mip_dual_bound", None)
    if res.status == 0:
        return _checked(model, np.asarray(res.x, dtype=float), True, nodes=nodes,
                        bound=float(bound) + model.obj_constant if bound is not None else None)
    if res.status == 1:
        sol = MilpSolution(Status.LIMIT_REACHED, nodes=nodes, message=res.message,
                           bound=None if bound is None else float(bound) + model.obj_constant)
        if res.x is not None:
            inc = _checked(model, np.asarray(res.x, dtype=float), True)
            if inc.optimal:
                sol.x, sol.objective = inc.x, inc.objective
        return sol
    if res.status == 2:
        return MilpSolution(Status.INFEASIBLE, nodes=nodes, message=res.message)
    if res.status == 3:
        return MilpSolution(Status.UNBOUNDED, nodes=nodes, message=res.message)
    return MilpSolution(Status.NUMERICAL_ERROR, nodes=nodes, message=res.message)

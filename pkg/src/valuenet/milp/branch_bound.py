"""Best-bound branch and bound over binary variables, on top of the native simplex."""

from __future__ import annotations

import heapq
import itertools
import math
import time

import numpy as np

from .model import INT_TOL, Limits, MilpModel, MilpSolution, Status
from .simplex import solve_lp_native

REL_GAP = 1e-9
ABS_GAP = 1e-9


def _most_fractional(x: np.ndarray, mask: np.ndarray) -> int:
    frac = np.abs(x - np.round(x))
    frac[~mask] = 0.0
    k = int(np.argmax(frac))
    return k if frac[k] > INT_TOL else -1


def _gap_closed(incumbent: float, bound: float) -> bool:
    return incumbent - bound <= max(ABS_GAP, REL_GAP * abs(incumbent))


def solve_milp_native(model: MilpModel, limits: Limits | None = None) -> MilpSolution:
    limits = limits or Limits()
    started = time.monotonic()
    mask = model.binary_mask()
    lb0, ub0 = model.bounds()
    best_x: np.ndarray | None = None
    best_obj = math.inf
    tie = itertools.count()
    root = solve_lp_native(model, lb0, ub0)
    nodes = 1
    if root.status is Status.INFEASIBLE:
        return MilpSolution(Status.INFEASIBLE, nodes=nodes, message="root relaxation infeasible")
    if root.status is Status.UNBOUNDED:
        return MilpSolution(Status.UNBOUNDED, nodes=nodes, message="root relaxation unbounded")
    if root.status is not Status.OPTIMAL:
        return MilpSolution(root.status, nodes=nodes, message=root.message)
    heap = [(root.objective, next(tie), lb0, ub0, root)]
    while heap:
        bound = heap[0][0]
        if best_x is not None and _gap_closed(best_obj, bound):
            break
        hit_nodes = limits.node_limit is not None and nodes >= limits.node_limit
        hit_time = limits.time_limit is not None and time.monotonic() - started >= limits.time_limit
        if hit_nodes or hit_time:
            return MilpSolution(Status.LIMIT_REACHED, objective=None if best_x is None else best_obj,
                                x=best_x, bound=bound, nodes=nodes, message="node or time limit")
        obj, _, lb, ub, sol = heapq.heappop(heap)
        if obj >= best_obj - max(ABS_GAP, REL_GAP * abs(best_obj)):
            continue
        k = _most_fractional(sol.x, mask)
        if k < 0:
            x = sol.x.copy()
            x[mask] = np.round(x[mask])
            best_x, best_obj = x, model.evaluate(x)
            continue
        for value in (0.0, 1.0):
            lb_c, ub_c = lb.copy(), ub.copy()
            lb_c[k] = ub_c[k] = value
            child = solve_lp_native(model, lb_c, ub_c)
            nodes += 1
            if child.status is Status.OPTIMAL:
                if child.objective < best_obj:
                    heapq.heappush(heap, (child.objective, next(tie), lb_c, ub_c, child))
            elif child.status is Status.NUMERICAL_ERROR:
                return MilpSolution(Status.NUMERICAL_ERROR, nodes=nodes, message=child.message)
    if best_x is None:
        return MilpSolution(Status.INFEASIBLE, nodes=nodes, message="no integral point")
    return MilpSolution(Status.OPTIMAL, objective=best_obj, x=best_x, bound=min(best_obj, heap[0][0]) if heap else best_obj,
                        nodes=nodes)

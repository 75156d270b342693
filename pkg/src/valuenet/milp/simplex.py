"""Two-phase bounded-variable primal simplex on a dense tableau.

Variables are shifted so that every column lives in ``[0, u]`` with ``u``
possibly infinite; nonbasic columns sit at either bound.  Pricing is
Dantzig's rule, switching to Bland's rule after a run of degenerate pivots.
"""

from __future__ import annotations

import math

import numpy as np

from .model import FEAS_TOL, MilpModel, MilpSolution, Sense, Status

PIVOT_TOL = 1e-9
COST_TOL = 1e-9
DEGENERATE_RUN = 1000


class _Tableau:
    """Dense tableau ``T = B^-1 A`` together with basic values and reduced costs."""

    def __init__(self, A: np.ndarray, rhs: np.ndarray, upper: np.ndarray, basis: np.ndarray) -> None:
        self.T = A.copy()
        self.upper = upper
        self.basis = basis.copy()
        self.at_upper = np.zeros(A.shape[1], dtype=bool)
        self.beta = rhs.copy()
        self.max_iter = 50 * (A.shape[0] + A.shape[1]) + 1000

    def set_costs(self, cost: np.ndarray) -> None:
        self.cost = cost
        self.reduced = cost - cost[self.basis] @ self.T

    def _entering(self, bland: bool) -> tuple[int, int]:
        d = self.reduced
        nonbasic = np.ones(d.shape[0], dtype=bool)
        nonbasic[self.basis] = False
        up = nonbasic & ~self.at_upper & (d < -COST_TOL) & (self.upper > 0)
        down = nonbasic & self.at_upper & (d > COST_TOL)
        cand = np.nonzero(up | down)[0]
        if cand.size == 0:
            return -1, 0
        if bland:
            j = int(cand[0])
        else:
            j = int(cand[np.argmax(np.abs(d[cand]))])
        return j, (1 if up[j] else -1)

    def _ratio(self, j: int, direction: int, bland: bool) -> tuple[float, int, bool]:
        col = self.T[:, j] * direction
        ub_basic = self.upper[self.basis]
        pos = col > PIVOT_TOL
        neg = (col < -PIVOT_TOL) & np.isfinite(ub_basic)
        steps = np.full(col.shape[0], math.inf)
        steps[pos] = np.maximum(self.beta[pos], 0.0) / col[pos]
        steps[neg] = np.maximum(ub_basic[neg] - self.beta[neg], 0.0) / -col[neg]
        t_min = float(steps.min(initial=math.inf))
        if self.upper[j] <= t_min:
            return float(self.upper[j]), -1, False
        ties = np.nonzero(steps <= t_min + 1e-12)[0]
        if bland:
            r = int(ties[np.argmin(self.basis[ties])])
        else:
            r = int(ties[np.argmax(np.abs(col[ties]))])
        return t_min, r, bool(neg[r])

    def _pivot(self, r: int, j: int) -> None:
        piv = self.T[r, j]
        self.T[r] /= piv
        col = self.T[:, j].copy()
        col[r] = 0.0
        nz = np.nonzero(np.abs(col) > 0)[0]
        if nz.size:
            self.T[nz] -= np.outer(col[nz], self.T[r])
        self.reduced -= self.reduced[j] * self.T[r]
        self.basis[r] = j

    def run(self) -> str:
        degenerate, bland = 0, False
        for _ in range(self.max_iter):
            j, direction = self._entering(bland)
            if j < 0:
                return "optimal"
            t, r, to_upper = self._ratio(j, direction, bland)
            if not math.isfinite(t):
                return "unbounded"
            self.beta -= t * direction * self.T[:, j]
            if r < 0:
                # entering column moves to its opposite bound without a basis change
                self.at_upper[j] = not self.at_upper[j]
            else:
                leaving = self.basis[r]
                start = self.upper[j] if self.at_upper[j] else 0.0
                self.beta[r] = start + direction * t
                self.at_upper[j] = False
                self._pivot(r, j)
                self.at_upper[leaving] = to_upper
            if t <= 1e-12:
                degenerate += 1
                if degenerate >= DEGENERATE_RUN:
                    bland = True
            else:
                degenerate = 0
        return "iteration_limit"

    def values(self) -> np.ndarray:
        x = np.where(self.at_upper, self.upper, 0.0)
        x[self.basis] = self.beta
        return x


def _standard_form(model: MilpModel, lb: np.ndarray, ub: np.ndarray):
    """Map the model onto ``A y = r, 0 <= y <= u`` and return the recovery map."""
    n = model.num_vars
    # column k of the original variable is recovered as offset + sum(sign * y[col])
    recover: list[list[tuple[int, float]]] = []
    offset = np.zeros(n)
    upper: list[float] = []
    cols = 0
    for k in range(n):
        lo, hi = lb[k], ub[k]
        if math.isfinite(lo):
            offset[k] = lo
            recover.append([(cols, 1.0)])
            upper.append(hi - lo)
            cols += 1
        elif math.isfinite(hi):
            offset[k] = hi
            recover.append([(cols, -1.0)])
            upper.append(math.inf)
            cols += 1
        else:
            recover.append([(cols, 1.0), (cols + 1, -1.0)])
            upper.extend([math.inf, math.inf])
            cols += 2
    m = model.num_constraints
    slack_rows = [r for r, con in enumerate(model.constraints) if con.sense is not Sense.EQ]
    total = cols + len(slack_rows)
    A = np.zeros((m, total))
    rhs = np.zeros(m)
    for r, con in enumerate(model.constraints):
        rhs[r] = con.rhs
        for k, v in zip(con.indices, con.values):
            rhs[r] -= v * offset[k]
            for col, sign in recover[k]:
                A[r, col] += v * sign
    for s, r in enumerate(slack_rows):
        A[r, cols + s] = 1.0 if model.constraints[r].sense is Sense.LE else -1.0
    upper.extend([math.inf] * len(slack_rows))
    cost = np.zeros(total)
    c = model.cost_vector()
    const = float(c @ offset)
    for k in range(n):
        for col, sign in recover[k]:
            cost[col] += c[k] * sign
    return A, rhs, np.array(upper), cost, const, recover, offset


def solve_lp_native(model: MilpModel, lb: np.ndarray | None = None, ub: np.ndarray | None = None) -> MilpSolution:
    """Solve the LP relaxation of ``model`` (binary marks ignored)."""
    mlb, mub = model.bounds()
    lb = mlb if lb is None else lb
    ub = mub if ub is None else ub
    if np.any(lb > ub + FEAS_TOL):
        return MilpSolution(Status.INFEASIBLE, message="empty variable box")
    ub = np.maximum(ub, lb)
    A, rhs, upper, cost, const, recover, offset = _standard_form(model, lb, ub)
    m, n = A.shape
    if m == 0:
        # only bounds: each column goes to whichever bound its cost prefers
        y = np.zeros(n)
        for j in range(n):
            if cost[j] < 0:
                if not math.isfinite(upper[j]):
                    return MilpSolution(Status.UNBOUNDED, message="unbounded column")
                y[j] = upper[j]
        return _finish(model, y, recover, offset, const, np.zeros(0))
    flip = rhs < 0
    A[flip] *= -1
    rhs = np.abs(rhs)
    # phase one: artificial identity basis, minimize the artificial sum
    A1 = np.hstack([A, np.eye(m)])
    upper1 = np.concatenate([upper, np.full(m, math.inf)])
    tab = _Tableau(A1, rhs, upper1, np.arange(n, n + m))
    cost1 = np.concatenate([np.zeros(n), np.ones(m)])
    tab.set_costs(cost1)
    outcome = tab.run()
    if outcome == "iteration_limit":
        return MilpSolution(Status.NUMERICAL_ERROR, message="phase one iteration limit")
    infeas = float(cost1 @ tab.values())
    if infeas > FEAS_TOL * (1.0 + float(rhs.max(initial=0.0))):
        return MilpSolution(Status.INFEASIBLE, message=f"phase one residual {infeas:.3g}")
    # drive remaining artificials out of the basis, dropping redundant rows
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if tab.basis[r] >= n:
            row = np.abs(tab.T[r, :n])
            row[tab.basis[tab.basis < n]] = 0.0
            j = int(np.argmax(row)) if row.size else -1
            if j >= 0 and row[j] > PIVOT_TOL:
                value = tab.upper[j] if tab.at_upper[j] else 0.0
                tab._pivot(r, j)
                tab.beta[r] = value
                tab.at_upper[j] = False
            else:
                keep[r] = False
    T = tab.T[keep][:, :n]
    basis = tab.basis[keep]
    tab2 = _Tableau(T, tab.beta[keep], upper, basis)
    tab2.T = T
    tab2.at_upper = tab.at_upper[:n].copy()
    tab2.set_costs(cost)
    outcome = tab2.run()
    if outcome == "unbounded":
        return MilpSolution(Status.UNBOUNDED, message="unbounded ray")
    if outcome == "iteration_limit":
        return MilpSolution(Status.NUMERICAL_ERROR, message="phase two iteration limit")
    y = tab2.values()
    basis = tab2.basis
    # duals from the final basis on the kept rows: y_B^T = c_B^T B^-1
    sign = np.where(flip, -1.0, 1.0)[keep]
    Ab = A[keep][:, basis]
    try:
        duals_kept = np.linalg.solve(Ab.T, cost[basis])
    except np.linalg.LinAlgError:
        return MilpSolution(Status.NUMERICAL_ERROR, message="singular final basis")
    duals = np.zeros(m)
    duals[np.nonzero(keep)[0]] = duals_kept * sign
    # complementary slackness: reduced costs must price out with the right sign at each bound
    red = cost - A[keep].T @ duals_kept
    at_up = tab2.at_upper
    nonbasic = np.ones(n, dtype=bool)
    nonbasic[basis] = False
    scale = 1.0 + float(np.abs(cost).max(initial=0.0))
    movable = upper > 0
    bad = nonbasic & movable & ((~at_up & (red < -1e-6 * scale)) | (at_up & (red > 1e-6 * scale)))
    if np.any(bad):
        return MilpSolution(Status.NUMERICAL_ERROR, message="dual infeasible at termination")
    return _finish(model, y, recover, offset, const, duals)


def _finish(model: MilpModel, y, recover, offset, const, duals) -> MilpSolution:
    x = offset.copy()
    for k, parts in enumerate(recover):
        for col, sign in parts:
            x[k] += sign * y[col]
    if model.violations(x, integrality=False):
        return MilpSolution(Status.NUMERICAL_ERROR, message="primal check failed")
    obj = model.evaluate(x)
    return MilpSolution(Status.OPTIMAL, objective=obj, x=x, bound=obj, duals=duals)

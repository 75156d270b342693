"""Follower value function evaluation.

``phibar(s)`` is ``min d y`` over binary ``y`` with ``B y >= b - s`` (``+inf``
when empty) and ``phi(x) = phibar(A x)``.  Ties among optimal responses go to
the lexicographically smallest ``y``.
"""

from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .instance import BilevelInstance
from .milp import DEFAULT_BACKEND, MilpModel, Status, solve_milp

ENUMERATION_LIMIT = 16


@dataclass(frozen=True)
class FollowerResult:
    value: float
    y: tuple[int, ...] | None

    @property
    def feasible(self) -> bool:
        return self.y is not None


INFEASIBLE = FollowerResult(math.inf, None)


def response_value(d: np.ndarray, y: Sequence[int]) -> float:
    """Exactly rounded ``d . y``, so equal sums compare equal."""
    return math.fsum(float(d[k]) for k, v in enumerate(y) if v)


def state_floor(inst: BilevelInstance) -> np.ndarray:
    """Least state component that still admits some follower response: ``b - max_y B y``."""
    return np.asarray(inst.b, dtype=np.int64) - np.clip(inst.B, 0, None).sum(axis=1).astype(np.int64)


class FollowerOracle:
    """Memoized follower solver for one instance.

    Small follower spaces (``n_f <= enumeration_limit``) are enumerated in
    numpy; larger ones go through the MILP engine with a lexicographic
    tie-break pass.
    """

    def __init__(self, inst: BilevelInstance, enumeration_limit: int = ENUMERATION_LIMIT,
                 backend: str = DEFAULT_BACKEND) -> None:
        self.inst = inst
        self.backend = backend
        self._cache: dict[tuple[int, ...], FollowerResult] = {}
        self._lock = threading.Lock()
        self.enumerated = inst.n_f <= enumeration_limit
        if self.enumerated:
            ys = np.array(list(itertools.product((0, 1), repeat=inst.n_f)), dtype=np.int64)
            values = np.array([response_value(inst.d, y) for y in ys])
            # stable sort keeps lexicographic order among equal values
            order = np.argsort(values, kind="stable")
            self._ys = ys[order]
            self._values = values[order]
            self._activity = self._ys @ np.asarray(inst.B, dtype=np.int64).T
        self.queries = 0

    def phibar(self, s: Sequence[int]) -> FollowerResult:
        key = tuple(int(v) for v in s)
        if len(key) != self.inst.m:
            raise ValueError(f"state has {len(key)} components, expected {self.inst.m}")
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        result = self._solve(key)
        with self._lock:
            self._cache.setdefault(key, result)
            self.queries += 1
        return result

    def phi(self, x: Sequence[int]) -> FollowerResult:
        return self.phibar(self.inst.state(x))

    def _solve(self, s: tuple[int, ...]) -> FollowerResult:
        rhs = np.asarray(self.inst.b, dtype=np.int64) - np.array(s, dtype=np.int64)
        if self.enumerated:
            ok = np.all(self._activity >= rhs, axis=1)
            if not ok.any():
                return INFEASIBLE
            k = int(np.argmax(ok))
            return FollowerResult(float(self._values[k]), tuple(int(v) for v in self._ys[k]))
        return self._solve_milp(rhs)

    def _solve_milp(self, rhs: np.ndarray) -> FollowerResult:
        inst = self.inst
        model = MilpModel("follower")
        ys = [model.add_var(f"y{k}", binary=True) for k in range(inst.n_f)]
        for i in range(inst.m):
            model.add_constr(zip(ys, inst.B[i].tolist()), ">=", float(rhs[i]))
        model.set_objective(zip(ys, inst.d.tolist()))
        sol = solve_milp(model, backend=self.backend)
        if sol.status is Status.INFEASIBLE:
            return INFEASIBLE
        if not sol.optimal:
            raise RuntimeError(f"follower solve failed: {sol.status.value} {sol.message}")
        best = response_value(inst.d, np.round(sol.x).astype(int))
        slack = 1e-9 * (1.0 + abs(best))
        model.add_constr(zip(ys, inst.d.tolist()), "<=", best + slack)
        model.set_objective([])
        fixed: list[int] = []
        for k in range(inst.n_f):
            trial = model.copy()
            trial.variables[ys[k]].ub = 0.0
            probe = solve_milp(trial, backend=self.backend)
            choice = 0 if probe.optimal else 1
            model.variables[ys[k]].lb = model.variables[ys[k]].ub = float(choice)
            fixed.append(choice)
        return FollowerResult(response_value(inst.d, fixed), tuple(fixed))

    def phibar_table(self, states: np.ndarray) -> np.ndarray:
        """Vector of ``phibar`` values (``inf`` when infeasible) for each row of ``states``."""
        return np.array([self.phibar(row).value for row in np.asarray(states)], dtype=float)


def eval_phibar(inst: BilevelInstance, s: Sequence[int]) -> FollowerResult:
    return FollowerOracle(inst).phibar(s)


def eval_phi(inst: BilevelInstance, x: Sequence[int]) -> FollowerResult:
    return FollowerOracle(inst).phi(x)


def phi_identity_check(inst: BilevelInstance, x1: Sequence[int], x2: Sequence[int]) -> bool:
    """True when both leader decisions induce the same state, hence the same follower value."""
    return inst.state(x1) == inst.state(x2)

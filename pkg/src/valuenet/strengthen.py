"""Tightening terminal values with a sampled max-min problem.

For a set of leader decisions (a terminal's box, its incoming paths, or the
whole leader space), the largest follower value is bounded by

    max_x  min { d.y_k : sampled y_k feasible at x }

which is a MILP: binary ``gamma_kj`` certify that sample ``k`` violates
interaction row ``j`` at ``x``, which releases the bound ``delta <= d.y_k``.
The argmax ``x*`` is then answered exactly by the follower and the response is
added to the sample set until it repeats.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .approx import Hyperrectangle, terminal_boxes
from .flow import build_flow_polytope
from .follower import FollowerOracle, response_value, state_floor
from .instance import BilevelInstance
from .milp import DEFAULT_BACKEND, Limits, MilpModel, Status, solve_milp
from .network import ValueNetwork, prune, reduce

log = logging.getLogger(__name__)

MODES = ("hyperrectangle", "exact_paths")


class SampleSet:
    """Distinct follower vectors in insertion order."""

    def __init__(self, n_f: int, ys: Iterable[Sequence[int]] = ()) -> None:
        self.n_f = n_f
        self._ys: list[tuple[int, ...]] = []
        self._seen: set[tuple[int, ...]] = set()
        for y in ys:
            self.add(y)

    def add(self, y: Sequence[int]) -> bool:
        key = tuple(int(v) for v in y)
        if len(key) != self.n_f or any(v not in (0, 1) for v in key):
            raise ValueError(f"sample {key} is not a binary vector of length {self.n_f}")
        if key in self._seen:
            return False
        self._seen.add(key)
        self._ys.append(key)
        return True

    def __contains__(self, y: Sequence[int]) -> bool:
        return tuple(int(v) for v in y) in self._seen

    def __len__(self) -> int:
        return len(self._ys)

    def __iter__(self):
        return iter(self._ys)

    def copy(self) -> "SampleSet":
        return SampleSet(self.n_f, self._ys)


@dataclass(frozen=True)
class RobustModelParams:
    """Settings of the sampled max-min model and the strengthening loop.

    ``epsilon`` is the margin by which a row must be violated (1 on integer
    data).  ``big_m`` caps the bound when no sample is feasible; when unset
    the caller's current value is used.
    """

    epsilon: float = 1.0
    big_m: float | None = None
    max_iterations: int = 5
    mode: str = "hyperrectangle"
    leader_rows: bool = False
    node_limit: int | None = None
    time_limit: float | None = None

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.mode not in MODES:
            raise ValueError(f"unknown strengthening mode {self.mode!r}")


def default_epsilon(inst: BilevelInstance) -> float:
    return 1.0 if inst.is_integral else 1e-4


def a_bar(inst: BilevelInstance, y: Sequence[int]) -> np.ndarray:
    """Per-row upper bound of ``a_j.x + B_j.y - b_j`` over binary ``x`` for a fixed ``y``."""
    A = np.asarray(inst.A, dtype=float)
    B = np.asarray(inst.B, dtype=float)
    return np.clip(A, 0, None).sum(axis=1) + B @ np.asarray(y, dtype=float) - np.asarray(inst.b, dtype=float)


@dataclass(frozen=True)
class BoxRegion:
    lo: tuple[int, ...]
    hi: tuple[int, ...]


@dataclass(frozen=True)
class PathRegion:
    net: ValueNetwork
    terminal: int


@dataclass(frozen=True)
class FreeRegion:
    """All leader decisions whose state is not below the follower feasibility floor."""


@dataclass
class MaxMinResult:
    status: Status
    value: float
    x: tuple[int, ...] | None

    @property
    def reachable(self) -> bool:
        return self.x is not None


def _region_rows(model: MilpModel, inst: BilevelInstance, xs: list[int], region) -> None:
    A = np.asarray(inst.A, dtype=float)
    if isinstance(region, BoxRegion):
        for i in range(inst.m):
            terms = list(zip(xs, A[i].tolist()))
            model.add_constr(terms, ">=", float(region.lo[i]), name=f"box_lo_{i}")
            model.add_constr(terms, "<=", float(region.hi[i]), name=f"box_hi_{i}")
    elif isinstance(region, PathRegion):
        build_flow_polytope(region.net, model, x_vars=xs, terminal=region.terminal, with_value=False)
    elif isinstance(region, FreeRegion):
        floor = state_floor(inst)
        for i in range(inst.m):
            model.add_constr(list(zip(xs, A[i].tolist())), ">=", float(floor[i]), name=f"floor_{i}")
    else:
        raise TypeError(f"unknown region {region!r}")


def _leader_row_system(model: MilpModel, inst: BilevelInstance, xs: list[int]) -> None:
    """Require some follower vector that satisfies the leader and interaction rows with ``x``."""
    ys = [model.add_var(f"v{k}", binary=True) for k in range(inst.n_f)]
    for i in range(inst.m_L):
        terms = list(zip(xs, inst.Gx[i].tolist())) + list(zip(ys, inst.Gy[i].tolist()))
        model.add_constr(terms, ">=", float(inst.h[i]), name=f"lead_{i}")
    for i in range(inst.m):
        terms = list(zip(xs, np.asarray(inst.A[i], dtype=float).tolist()))
        terms += list(zip(ys, np.asarray(inst.B[i], dtype=float).tolist()))
        model.add_constr(terms, ">=", float(inst.b[i]), name=f"inter_{i}")


def build_maxmin_model(inst: BilevelInstance, region, samples: SampleSet, cap: float,
                       params: RobustModelParams, excluded: Iterable[Sequence[int]] = ()) -> tuple[MilpModel, list[int], int]:
    """Sampled max-min MILP; returns the model, the leader variables and ``delta``."""
    model = MilpModel("maxmin")
    xs = [model.add_var(f"x{k}", binary=True) for k in range(inst.n_l)]
    delta = model.add_var("delta", -math.inf, float(cap))
    model.set_objective([(delta, -1.0)])
    _region_rows(model, inst, xs, region)
    if params.leader_rows:
        _leader_row_system(model, inst, xs)
    A = np.asarray(inst.A, dtype=float)
    B = np.asarray(inst.B, dtype=float)
    b = np.asarray(inst.b, dtype=float)
    lowest = np.clip(A, None, 0).sum(axis=1)
    eps = params.epsilon
    for k, y in enumerate(samples):
        g = response_value(inst.d, y)
        if g >= cap:
            continue
        rhs = b - B @ np.asarray(y, dtype=float)
        bars = a_bar(inst, y)
        # rows that some binary x can violate by at least eps
        rows = [j for j in range(inst.m) if lowest[j] <= rhs[j] - eps]
        if not rows:
            model.add_constr([(delta, 1.0)], "<=", g, name=f"cap_{k}")
            continue
        gammas = [model.add_var(f"g_{k}_{j}", binary=True) for j in rows]
        big = float(cap) - g
        model.add_constr([(delta, 1.0)] + [(v, -big) for v in gammas], "<=", g, name=f"sample_{k}")
        for v, j in zip(gammas, rows):
            # gamma = 1 forces a_j.x <= rhs_j - eps; gamma = 0 leaves a_j.x <= sum of positive a_j
            terms = list(zip(xs, A[j].tolist())) + [(v, eps + float(bars[j]))]
            model.add_constr(terms, "<=", float(rhs[j] + bars[j]), name=f"block_{k}_{j}")
    for n, x in enumerate(excluded):
        ones = [xs[i] for i, v in enumerate(x) if v]
        zeros = [xs[i] for i, v in enumerate(x) if not v]
        model.add_constr([(v, -1.0) for v in ones] + [(v, 1.0) for v in zeros], ">=", 1.0 - len(ones),
                         name=f"nogood_{n}")
    return model, xs, delta


def solve_sampled_maxmin(inst: BilevelInstance, region, samples: SampleSet, cap: float,
                         params: RobustModelParams | None = None, excluded: Iterable[Sequence[int]] = (),
                         backend: str = DEFAULT_BACKEND) -> MaxMinResult:
    """Largest, over leader decisions in ``region``, of the least sampled follower value feasible there.

    Returns ``x = None`` when the region holds no leader decision.
    """
    params = params or RobustModelParams(epsilon=default_epsilon(inst))
    model, xs, delta = build_maxmin_model(inst, region, samples, cap, params, excluded)
    sol = solve_milp(model, Limits(params.node_limit, params.time_limit), backend=backend)
    if sol.status is Status.INFEASIBLE:
        return MaxMinResult(Status.INFEASIBLE, -math.inf, None)
    if sol.x is None:
        raise RuntimeError(f"max-min solve failed: {sol.status.value} {sol.message}")
    x = tuple(int(round(sol.x[v])) for v in xs)
    if sol.optimal:
        return MaxMinResult(Status.OPTIMAL, float(sol.x[delta]), x)
    # a limit leaves only the dual bound as a valid upper value
    return MaxMinResult(sol.status, min(float(cap), -float(sol.bound)), x)


def brute_force_maxmin(inst: BilevelInstance, xs: Iterable[Sequence[int]], samples: SampleSet,
                       cap: float) -> float:
    """Reference value of the sampled max-min by double enumeration."""
    B = np.asarray(inst.B, dtype=np.int64)
    best = -math.inf
    for x in xs:
        rhs = np.asarray(inst.b, dtype=np.int64) - np.array(inst.state(x), dtype=np.int64)
        vals = [response_value(inst.d, y) for y in samples if np.all(B @ np.array(y) >= rhs)]
        best = max(best, min([cap] + vals))
    return best


@dataclass
class StrengthenResult:
    value: float
    iterations: int
    x: tuple[int, ...] | None
    reachable: bool = True
    history: list[float] = field(default_factory=list)


def strengthen_terminal(inst: BilevelInstance, net: ValueNetwork, terminal: int, samples: SampleSet,
                        params: RobustModelParams | None = None, oracle: FollowerOracle | None = None,
                        backend: str = DEFAULT_BACKEND) -> StrengthenResult:
    """Lower one terminal value while keeping it above ``phi`` on every leader decision reaching it.

    ``samples`` grows in place with the follower responses met along the way.
    """
    params = params or RobustModelParams(epsilon=default_epsilon(inst))
    oracle = oracle or FollowerOracle(inst, backend=backend)
    value = float(net.values[terminal])
    if params.mode == "exact_paths":
        regions = [PathRegion(net, terminal)]
    else:
        boxes = terminal_boxes(net, terminal)
        if not boxes:
            raise ValueError(f"terminal {terminal} carries no box annotation")
        if all(b.is_point for b in boxes):
            return StrengthenResult(value, 0, None)
        regions = [BoxRegion(b.lo, b.hi) for b in boxes]
    excluded: list[tuple[int, ...]] = []
    history = [value]
    best_x = None
    it = 0
    while it < params.max_iterations:
        it += 1
        cap = value if params.big_m is None else min(value, float(params.big_m))
        results = [solve_sampled_maxmin(inst, r, samples, cap, params, excluded, backend) for r in regions]
        found = [r for r in results if r.reachable]
        if not found:
            if not excluded:
                return StrengthenResult(value, it, None, reachable=False, history=history)
            # every remaining decision was follower-infeasible and cut off
            break
        top = max(found, key=lambda r: r.value)
        value = min(value, top.value)
        history.append(value)
        best_x = top.x
        response = oracle.phi(top.x)
        if not response.feasible:
            excluded.append(top.x)
            continue
        if not samples.add(response.y):
            break
    return StrengthenResult(value, it, best_x, history=history)


def strengthen_network(inst: BilevelInstance, net: ValueNetwork, samples: SampleSet | None = None,
                       params: RobustModelParams | None = None, oracle: FollowerOracle | None = None,
                       backend: str = DEFAULT_BACKEND, reduce_output: bool = True) -> ValueNetwork:
    """Strengthen every terminal, loosest first, and drop terminals no leader decision reaches."""
    params = params or RobustModelParams(epsilon=default_epsilon(inst))
    oracle = oracle or FollowerOracle(inst, backend=backend)
    if net.is_empty:
        return net
    if samples is None:
        samples = init_samples(inst, oracle=oracle, backend=backend)
    values = np.array(net.values, dtype=float)
    alive = np.ones(len(values), dtype=bool)
    iterations = 0
    for t in sorted(range(len(values)), key=lambda k: -values[k]):
        res = strengthen_terminal(inst, net, t, samples, params, oracle, backend)
        iterations += res.iterations
        if not res.reachable:
            alive[t] = False
        else:
            values[t] = min(values[t], res.value)
    arcs = [a.copy() for a in net.arcs]
    annotations = [list(layer) for layer in net.annotations]
    if not alive.all():
        remap = np.full(len(values), -1, dtype=np.int64)
        remap[alive] = np.arange(int(alive.sum()))
        if arcs:
            arcs[-1] = np.where(arcs[-1] >= 0, remap[np.maximum(arcs[-1], 0)], -1)
        annotations[-1] = [a for a, k in zip(annotations[-1], alive) if k]
        values = values[alive]
    meta = dict(net.meta, strengthened=True, strengthen_iterations=iterations, samples=len(samples))
    out = prune(ValueNetwork(arcs, values.tolist(), net.order, annotations, meta))
    return reduce(out) if reduce_output else out


def init_samples(inst: BilevelInstance, oracle: FollowerOracle | None = None, iteration_cap: int = 50,
                 backend: str = DEFAULT_BACKEND) -> SampleSet:
    """Follower responses met while bounding the follower value over all leader decisions."""
    from .reformulation import compute_big_m

    oracle = oracle or FollowerOracle(inst, backend=backend)
    res = compute_big_m(inst, iteration_cap=iteration_cap, oracle=oracle, backend=backend)
    samples = SampleSet(inst.n_f, res.samples)
    if not len(samples):
        first = oracle.phi([0] * inst.n_l)
        samples.add(first.y if first.feasible else [0] * inst.n_f)
    return samples


__all__ = [
    "BoxRegion", "FreeRegion", "Hyperrectangle", "MaxMinResult", "PathRegion", "RobustModelParams",
    "SampleSet", "StrengthenResult", "a_bar", "brute_force_maxmin", "build_maxmin_model", "default_epsilon",
    "init_samples", "solve_sampled_maxmin", "strengthen_network", "strengthen_terminal",
]

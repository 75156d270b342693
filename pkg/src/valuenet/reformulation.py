"""Single-level models of the bilevel problem.

* the high-point relaxation (leader and interaction rows only);
* the state-indicator model, one binary per reachable state;
* the strengthened model, which couples ``d.y <= z`` to the flow system of a
  value network;
* blocking cuts, which forbid ``d.y > d.y_hat`` while ``y_hat`` stays
  feasible for the chosen leader decision;
* a big-M bound on the follower value over all leader decisions.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .flow import FlowPolytope, build_flow_polytope
from .follower import FollowerOracle, response_value
from .instance import BilevelInstance
from .milp import DEFAULT_BACKEND, MilpModel
from .network import DEFAULT_NODE_CAP, ValueNetwork, enumerate_state_layers, variable_order
from .strengthen import FreeRegion, RobustModelParams, SampleSet, default_epsilon, solve_sampled_maxmin

log = logging.getLogger(__name__)


@dataclass
class BilevelModel:
    model: MilpModel
    x: list[int]
    y: list[int]
    z: int | None = None
    flow: FlowPolytope | None = None
    indicator: "IndicatorFragment | None" = None

    def split(self, values: np.ndarray) -> tuple[tuple[int, ...], tuple[int, ...]]:
        x = tuple(int(round(values[v])) for v in self.x)
        y = tuple(int(round(values[v])) for v in self.y)
        return x, y


def build_hpr(inst: BilevelInstance, relax: bool = False) -> BilevelModel:
    """``min c.x + p.y`` over the leader and interaction rows, without follower optimality."""
    model = MilpModel(f"{inst.name}_hpr" if inst.name else "hpr")
    xs = [model.add_var(f"x{k}", 0.0, 1.0, binary=not relax) for k in range(inst.n_l)]
    ys = [model.add_var(f"y{k}", 0.0, 1.0, binary=not relax) for k in range(inst.n_f)]
    for i in range(inst.m_L):
        terms = list(zip(xs, inst.Gx[i].tolist())) + list(zip(ys, inst.Gy[i].tolist()))
        model.add_constr(terms, ">=", float(inst.h[i]), name=f"lead_{i}")
    A = np.asarray(inst.A, dtype=float)
    B = np.asarray(inst.B, dtype=float)
    for i in range(inst.m):
        terms = list(zip(xs, A[i].tolist())) + list(zip(ys, B[i].tolist()))
        model.add_constr(terms, ">=", float(inst.b[i]), name=f"inter_{i}")
    model.set_objective(list(zip(xs, inst.c.tolist())) + list(zip(ys, inst.p.tolist())))
    return BilevelModel(model, xs, ys)


def _couple_value(bm: BilevelModel, inst: BilevelInstance, z: int) -> None:
    terms = list(zip(bm.y, inst.d.tolist())) + [(z, -1.0)]
    bm.model.add_constr(terms, "<=", 0.0, name="follower_value")


def build_strengthened(inst: BilevelInstance, net: ValueNetwork, relax: bool = False) -> BilevelModel:
    """High-point relaxation plus ``d.y <= z`` with ``(x, z)`` on a path of ``net``.

    ``z`` is free: the flow rows pin it to a terminal value.
    """
    bm = build_hpr(inst, relax)
    bm.model.name = bm.model.name.replace("_hpr", "_net") if bm.model.name != "hpr" else "net"
    z = bm.model.add_var("z", -math.inf, math.inf)
    bm.z = z
    bm.flow = build_flow_polytope(net, bm.model, x_vars=bm.x, z_var=z)
    _couple_value(bm, inst, z)
    return bm


@dataclass
class IndicatorFragment:
    model: MilpModel
    gammas: list[int]
    states: list[tuple[int, ...]]
    values: list[float]
    z_var: int


def reachable_states(inst: BilevelInstance, oracle: FollowerOracle | None = None,
                     node_cap: int = DEFAULT_NODE_CAP) -> list[tuple[int, ...]]:
    """States ``A x`` of binary leader decisions that admit a follower response."""
    layers = enumerate_state_layers(inst, oracle, variable_order(inst), node_cap)
    return [tuple(int(v) for v in s) for s in layers[-1]]


def build_indicator_model(inst: BilevelInstance, oracle: FollowerOracle | None = None,
                          model: MilpModel | None = None, x_vars: Sequence[int] | None = None,
                          z_var: int | None = None, relax: bool = False,
                          node_cap: int = DEFAULT_NODE_CAP) -> IndicatorFragment:
    """One binary per reachable state: ``A x = sum s g_s``, ``sum g_s = 1`` and ``z = sum phibar(s) g_s``."""
    oracle = oracle or FollowerOracle(inst)
    model = model if model is not None else MilpModel("indicator")
    xs = list(x_vars) if x_vars is not None else [
        model.add_var(f"x{k}", 0.0, 1.0, binary=not relax) for k in range(inst.n_l)]
    if z_var is None:
        z_var = model.add_var("z", -math.inf, math.inf)
    states = reachable_states(inst, oracle, node_cap)
    values = [oracle.phibar(s).value for s in states]
    gammas = [model.add_var(f"gamma{k}", 0.0, 1.0, binary=not relax) for k in range(len(states))]
    A = np.asarray(inst.A, dtype=float)
    for i in range(inst.m):
        terms = list(zip(xs, A[i].tolist())) + [(g, -float(s[i])) for g, s in zip(gammas, states)]
        model.add_constr(terms, "==", 0.0, name=f"state_{i}")
    model.add_constr([(g, 1.0) for g in gammas], "==", 1.0, name="one_state")
    model.add_constr([(z_var, 1.0)] + [(g, -v) for g, v in zip(gammas, values)], "==", 0.0,
                     name="state_value")
    return IndicatorFragment(model, gammas, states, values, z_var)


def build_indicator_bilevel(inst: BilevelInstance, oracle: FollowerOracle | None = None,
                            relax: bool = False) -> BilevelModel:
    """High-point relaxation plus ``d.y <= z`` with ``z`` the value of the active state."""
    bm = build_hpr(inst, relax)
    z = bm.model.add_var("z", -math.inf, math.inf)
    bm.z = z
    bm.indicator = build_indicator_model(inst, oracle, bm.model, x_vars=bm.x, z_var=z, relax=relax)
    _couple_value(bm, inst, z)
    return bm


@dataclass
class BigMResult:
    value: float
    samples: list[tuple[int, ...]]
    iterations: int
    converged: bool


def compute_big_m(inst: BilevelInstance, iteration_cap: int = 50, oracle: FollowerOracle | None = None,
                  backend: str = DEFAULT_BACKEND) -> BigMResult:
    """Upper bound on ``phi(x)`` over every leader decision with a follower response.

    Starts from the sum of the positive follower costs and tightens it with
    the sampled max-min over all leader decisions.  Each bound along the way
    is valid, so stopping at the cap is safe.
    """
    oracle = oracle or FollowerOracle(inst, backend=backend)
    cap = math.fsum(max(float(v), 0.0) for v in inst.d)
    samples = SampleSet(inst.n_f)
    params = RobustModelParams(epsilon=default_epsilon(inst))
    excluded: list[tuple[int, ...]] = []
    value = cap
    feasible_seen = -math.inf
    converged = False
    it = 0
    while it < iteration_cap:
        it += 1
        res = solve_sampled_maxmin(inst, FreeRegion(), samples, cap, params, excluded, backend)
        if not res.reachable:
            # no leader decision left with a follower response
            value = feasible_seen if feasible_seen > -math.inf else min(value, 0.0)
            converged = True
            break
        value = min(value, res.value)
        response = oracle.phi(res.x)
        if not response.feasible:
            excluded.append(res.x)
            continue
        feasible_seen = max(feasible_seen, response.value)
        if not samples.add(response.y):
            converged = True
            break
    return BigMResult(value, list(samples), it, converged)


@dataclass
class BlockingCutState:
    """Blocking cuts added so far, one indicator block per follower vector."""

    inst: BilevelInstance
    big_m: float
    epsilon: float = 1.0
    blocks: dict[tuple[int, ...], list[int]] = field(default_factory=dict)

    @property
    def registered(self) -> list[tuple[int, ...]]:
        return list(self.blocks)

    def a_bar(self, y_hat: Sequence[int]) -> np.ndarray:
        inst = self.inst
        A = np.asarray(inst.A, dtype=float)
        B = np.asarray(inst.B, dtype=float)
        return np.clip(A, 0, None).sum(axis=1) + B @ np.asarray(y_hat, dtype=float) - np.asarray(inst.b, dtype=float)


def add_blocking_cut(bm: BilevelModel, state: BlockingCutState, y_hat: Sequence[int]) -> bool:
    """Require ``d.y <= d.y_hat`` unless some interaction row rules ``y_hat`` out at ``x``.

    Binary ``w_j = 1`` certifies that row ``j`` is violated by ``y_hat`` and
    loosens the value bound by ``max(0, big_m - d.y_hat)``.  Returns ``False``
    (with a warning) when ``y_hat`` was already registered.
    """
    inst = state.inst
    key = tuple(int(v) for v in y_hat)
    if key in state.blocks:
        warnings.warn(f"blocking cut for {key} already present", RuntimeWarning, stacklevel=2)
        return False
    model = bm.model
    g = response_value(inst.d, key)
    big = max(0.0, float(state.big_m) - g)
    A = np.asarray(inst.A, dtype=float)
    B = np.asarray(inst.B, dtype=float)
    rhs = np.asarray(inst.b, dtype=float) - B @ np.asarray(key, dtype=float)
    bars = state.a_bar(key)
    lowest = np.clip(A, None, 0).sum(axis=1)
    tag = len(state.blocks)
    ws: list[int] = []
    for j in range(inst.m):
        if lowest[j] > rhs[j] - state.epsilon:
            continue  # no leader decision violates this row
        w = model.add_var(f"w_{tag}_{j}", binary=True)
        ws.append(w)
        terms = list(zip(bm.x, A[j].tolist())) + [(w, state.epsilon + float(bars[j]))]
        model.add_constr(terms, "<=", float(rhs[j] + bars[j]), name=f"blockrow_{tag}_{j}")
    terms = list(zip(bm.y, inst.d.tolist())) + [(w, -big) for w in ws]
    model.add_constr(terms, "<=", g, name=f"blockval_{tag}")
    state.blocks[key] = ws
    return True


__all__ = [
    "BigMResult", "BilevelModel", "BlockingCutState", "IndicatorFragment", "add_blocking_cut",
    "build_hpr", "build_indicator_bilevel", "build_indicator_model", "build_strengthened",
    "compute_big_m", "reachable_states",
]

"""Relaxation bounds and the exact cutting-plane bilevel solver.

The exact loop solves the network model, asks the follower for its response
at the leader decision ``x*`` and, while ``d.y*`` exceeds that response's
value, adds a blocking cut for it.  Every solve is a lower bound; every
follower answer yields a bilevel-feasible incumbent via an optimistic
re-solve.
"""

from __future__ import annotations

import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from .approx import MergePolicy, build_approx
from .follower import FollowerOracle, response_value
from .instance import BilevelInstance
from .milp import DEFAULT_BACKEND, Limits, MilpModel, Status, solve_milp
from .network import DEFAULT_NODE_CAP, ValueNetwork, build_state_network, network_stats, reduce
from .reformulation import (BlockingCutState, add_blocking_cut, build_hpr, build_strengthened,
                            compute_big_m)
from .strengthen import RobustModelParams, SampleSet, default_epsilon, strengthen_network

VARIANTS = ("hpr", "dd", "ddmaxmin")
VALUE_TOL = 1e-6


@dataclass(frozen=True)
class SolvePolicy:
    """Settings shared by the relaxations and the exact solver.

    ``budget=None`` builds the exact reduced network instead of an
    approximate one.
    """

    budget: int | None = 50
    strategy: str = "longest_path"
    order: str = "native"
    strengthen: bool = True
    strengthen_params: RobustModelParams | None = None
    big_m_iterations: int = 50
    max_iterations: int = 500
    time_limit: float | None = None
    node_limit: int | None = None
    node_cap: int = DEFAULT_NODE_CAP
    initial_cuts: bool = True
    backend: str = DEFAULT_BACKEND


@dataclass
class SolveReport:
    status: str
    variant: str
    objective: float | None = None
    x: tuple[int, ...] | None = None
    y: tuple[int, ...] | None = None
    lower_bound: float | None = None
    gap: float | None = None
    gap_reference: str | None = None
    iterations: int = 0
    timings: dict[str, float] = field(default_factory=dict)
    network: dict[str, Any] = field(default_factory=dict)
    log: list[dict[str, Any]] = field(default_factory=list)
    message: str = ""

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        for key in ("x", "y"):
            out[key] = list(out[key]) if out[key] is not None else None
        for key in ("objective", "lower_bound", "gap"):
            out[key] = _json_number(out[key])
        out["log"] = [{k: _json_number(v) for k, v in row.items()} for row in self.log]
        return out

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    def log_tsv(self) -> str:
        buf = io.StringIO()
        buf.write("iter\tlower_bound\tincumbent\tphi\tcut_added\n")
        for row in self.log:
            buf.write("\t".join(_fmt(row[k]) for k in ("iter", "lower_bound", "incumbent", "phi", "cut_added")))
            buf.write("\n")
        return buf.getvalue()


def _json_number(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def integer_gap(best: float | None, lower: float | None) -> float | None:
    """``(best - lower) / |best|``; zero when both agree, infinite when ``best`` is zero and they differ."""
    if best is None or lower is None or not math.isfinite(best):
        return None
    if not math.isfinite(lower):
        return math.inf if lower < 0 else 0.0
    diff = max(0.0, best - lower)
    if diff <= VALUE_TOL * max(1.0, abs(best)):
        return 0.0
    return diff / abs(best) if best != 0 else math.inf


def check_bilevel_feasible(inst: BilevelInstance, x: Sequence[int], y: Sequence[int], tol: float = VALUE_TOL,
                           oracle: FollowerOracle | None = None) -> bool:
    """Leader and interaction rows hold and ``y`` is follower-optimal at ``x`` within ``tol``."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if x.shape != (inst.n_l,) or y.shape != (inst.n_f,):
        return False
    if np.any((x != 0) & (x != 1)) or np.any((y != 0) & (y != 1)):
        return False
    if inst.m_L and np.any(inst.Gx @ x + inst.Gy @ y < inst.h - tol):
        return False
    if np.any(np.asarray(inst.A, dtype=np.int64) @ x + np.asarray(inst.B, dtype=np.int64) @ y
              < np.asarray(inst.b, dtype=np.int64)):
        return False
    phi = (oracle or FollowerOracle(inst)).phi(x.tolist())
    return phi.feasible and response_value(inst.d, y.tolist()) <= phi.value + tol


def optimistic_response(inst: BilevelInstance, x: Sequence[int], phi_value: float,
                        backend: str = DEFAULT_BACKEND) -> tuple[float, tuple[int, ...]] | None:
    """Best leader objective at fixed ``x`` over follower optima; ``None`` when the leader rows fail."""
    model = MilpModel("optimistic")
    ys = [model.add_var(f"y{k}", binary=True) for k in range(inst.n_f)]
    xv = np.asarray(x, dtype=float)
    for i in range(inst.m_L):
        model.add_constr(zip(ys, inst.Gy[i].tolist()), ">=", float(inst.h[i] - inst.Gx[i] @ xv))
    A = np.asarray(inst.A, dtype=float)
    B = np.asarray(inst.B, dtype=float)
    for i in range(inst.m):
        model.add_constr(zip(ys, B[i].tolist()), ">=", float(inst.b[i]) - float(A[i] @ xv))
    model.add_constr(zip(ys, inst.d.tolist()), "<=", phi_value + VALUE_TOL * max(1.0, abs(phi_value)))
    model.set_objective(zip(ys, inst.p.tolist()))
    sol = solve_milp(model, backend=backend)
    if not sol.optimal:
        return None
    y = tuple(int(round(v)) for v in sol.x[ys])
    return math.fsum([float(inst.c @ xv)] + [float(inst.p[k]) for k, v in enumerate(y) if v]), y


class _Clock:
    def __init__(self, limit: float | None) -> None:
        self.start = time.perf_counter()
        self.limit = limit

    def remaining(self) -> float | None:
        if self.limit is None:
            return None
        return max(0.0, self.limit - (time.perf_counter() - self.start))

    def expired(self) -> bool:
        r = self.remaining()
        return r is not None and r <= 0.0


def _timed(timings: dict[str, float], key: str, fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    timings[key] = timings.get(key, 0.0) + time.perf_counter() - t0
    return out


def build_network(inst: BilevelInstance, policy: SolvePolicy, strengthen: bool, oracle: FollowerOracle,
                  timings: dict[str, float], big_m: float | None = None,
                  samples: SampleSet | None = None) -> ValueNetwork:
    """Exact reduced network (no budget) or approximate network, optionally strengthened."""
    if policy.budget is None:
        raw = _timed(timings, "network", build_state_network, inst, oracle, None, policy.node_cap)
        return _timed(timings, "reduce", reduce, raw)
    merge = MergePolicy(budget=policy.budget, strategy=policy.strategy, order=policy.order)
    net = _timed(timings, "network", build_approx, inst, merge, oracle, big_m, False)
    net = _timed(timings, "reduce", reduce, net)
    if strengthen:
        params = policy.strengthen_params or RobustModelParams(epsilon=default_epsilon(inst))
        net = _timed(timings, "strengthen", strengthen_network, inst, net, samples, params, oracle,
                     policy.backend)
    return net


def _gap_fields(report: SolveReport, known_optimum: float | None) -> None:
    if known_optimum is not None:
        report.gap, report.gap_reference = integer_gap(known_optimum, report.lower_bound), "known"
    elif report.objective is not None:
        report.gap, report.gap_reference = integer_gap(report.objective, report.lower_bound), "incumbent"


def solve_relaxation(inst: BilevelInstance, variant: str = "dd", policy: SolvePolicy | None = None,
                     known_optimum: float | None = None, oracle: FollowerOracle | None = None) -> SolveReport:
    """Lower bound from the high-point relaxation or a network model.

    ``dd`` uses the approximate (or exact) network as built; ``ddmaxmin``
    strengthens its terminals first.  A bilevel-feasible incumbent is derived
    from the relaxation's leader decision when possible.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown relaxation {variant!r}; expected one of {VARIANTS}")
    policy = policy or SolvePolicy()
    oracle = oracle or FollowerOracle(inst, backend=policy.backend)
    timings: dict[str, float] = {}
    report = SolveReport(status="", variant=variant, timings=timings)
    t0 = time.perf_counter()
    if variant == "hpr":
        bm = build_hpr(inst)
    else:
        big_m = samples = None
        if variant == "ddmaxmin":
            res = _timed(timings, "big_m", compute_big_m, inst, policy.big_m_iterations, oracle, policy.backend)
            big_m, samples = res.value, SampleSet(inst.n_f, res.samples)
            if not len(samples):
                samples = None
        net = build_network(inst, policy, variant == "ddmaxmin", oracle, timings, big_m, samples)
        report.network = network_stats(net)
        bm = build_strengthened(inst, net)
    sol = _timed(timings, "milp", solve_milp, bm.model, Limits(policy.node_limit, policy.time_limit),
                 policy.backend)
    if sol.status is Status.INFEASIBLE:
        report.status, report.lower_bound = Status.INFEASIBLE.value, math.inf
    elif sol.optimal:
        report.status, report.lower_bound = Status.OPTIMAL.value, float(sol.objective)
        x, _ = bm.split(sol.x)
        phi = oracle.phi(x)
        if phi.feasible:
            inc = optimistic_response(inst, x, phi.value, policy.backend)
            if inc is not None:
                report.objective, report.y = inc
                report.x = x
    else:
        report.status = Status.LIMIT_REACHED.value
        report.lower_bound = float(sol.bound) if sol.bound is not None else -math.inf
        report.message = sol.message
    timings["total"] = time.perf_counter() - t0
    _gap_fields(report, known_optimum)
    return report


def _nogood(model: MilpModel, xs: list[int], x: Sequence[int], tag: int) -> None:
    ones = [xs[i] for i, v in enumerate(x) if v]
    zeros = [xs[i] for i, v in enumerate(x) if not v]
    model.add_constr([(v, -1.0) for v in ones] + [(v, 1.0) for v in zeros], ">=", 1.0 - len(ones),
                     name=f"nogood_{tag}")


def solve_exact(inst: BilevelInstance, policy: SolvePolicy | None = None, known_optimum: float | None = None,
                oracle: FollowerOracle | None = None) -> SolveReport:
    """Optimistic bilevel optimum by blocking cuts on the network model."""
    policy = policy or SolvePolicy()
    oracle = oracle or FollowerOracle(inst, backend=policy.backend)
    clock = _Clock(policy.time_limit)
    timings: dict[str, float] = {}
    report = SolveReport(status="", variant="exact", timings=timings)
    big = _timed(timings, "big_m", compute_big_m, inst, policy.big_m_iterations, oracle, policy.backend)
    samples = SampleSet(inst.n_f, big.samples)
    net = build_network(inst, policy, policy.strengthen and policy.budget is not None, oracle, timings,
                        big.value, samples.copy() if len(samples) else None)
    report.network = network_stats(net)
    bm = build_strengthened(inst, net)
    cuts = BlockingCutState(inst, big.value, default_epsilon(inst))
    if policy.initial_cuts:
        for y in samples:
            add_blocking_cut(bm, cuts, y)
    lower = -math.inf
    best: tuple[float, tuple[int, ...], tuple[int, ...]] | None = None
    status = Status.LIMIT_REACHED
    nogoods = 0
    it = 0
    while True:
        if clock.expired():
            report.message = "time limit reached"
            break
        sol = _timed(timings, "milp", solve_milp, bm.model, Limits(policy.node_limit, clock.remaining()),
                     policy.backend)
        if sol.status is Status.INFEASIBLE:
            # cuts keep every bilevel-feasible point, so nothing better than the incumbent exists
            status = Status.OPTIMAL if best is not None else Status.INFEASIBLE
            if best is not None:
                lower = max(lower, best[0])
            break
        if not sol.optimal:
            report.message = f"MILP stopped: {sol.status.value} {sol.message}".strip()
            if sol.bound is not None:
                lower = max(lower, float(sol.bound))
            break
        lower = max(lower, float(sol.objective))
        x, y = bm.split(sol.x)
        t0 = time.perf_counter()
        phi = oracle.phi(x)
        row = {"iter": it, "lower_bound": lower, "incumbent": best[0] if best else None,
               "phi": phi.value if phi.feasible else None, "cut_added": False}
        if phi.feasible:
            inc = optimistic_response(inst, x, phi.value, policy.backend)
            if inc is not None and (best is None or inc[0] < best[0]):
                best = (inc[0], x, inc[1])
                row["incumbent"] = inc[0]
        timings["separation"] = timings.get("separation", 0.0) + time.perf_counter() - t0
        if best is not None and best[0] - lower <= VALUE_TOL * max(1.0, abs(best[0])):
            report.log.append(row)
            status = Status.OPTIMAL
            break
        if it >= policy.max_iterations:
            report.log.append(row)
            report.message = f"iteration limit {policy.max_iterations} reached"
            break
        if not phi.feasible:
            _nogood(bm.model, bm.x, x, nogoods)
            nogoods += 1
        elif not add_blocking_cut(bm, cuts, phi.y):
            report.log.append(row)
            report.message = f"blocking cut for {phi.y} repeated; numerical trouble"
            status = Status.NUMERICAL_ERROR
            break
        row["cut_added"] = True
        report.log.append(row)
        it += 1
    report.status = status.value
    report.iterations = it
    report.lower_bound = lower
    if best is not None:
        report.objective, report.x, report.y = best
    if status is Status.INFEASIBLE:
        report.lower_bound = math.inf
    timings["total"] = time.perf_counter() - clock.start
    _gap_fields(report, known_optimum)
    return report


__all__ = [
    "SolvePolicy", "SolveReport", "VARIANTS", "build_network", "check_bilevel_feasible", "integer_gap",
    "optimistic_response", "solve_exact", "solve_relaxation",
]

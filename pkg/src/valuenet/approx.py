"""Budgeted approximate value networks built from state boxes.

Each node stands for a box ``[lo, hi]`` that contains every state reaching
it.  When a layer grows beyond the budget, nodes are merged into the box
hull.  A terminal box takes the follower value at its most restricted
corner ``lo``, which bounds the value of every contained state from above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .follower import FollowerOracle, state_floor
from .instance import BilevelInstance
from .network import ValueNetwork, empty_network, prune, reduce, remaining_gain, variable_order


@dataclass(frozen=True)
class Hyperrectangle:
    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.lo) != len(self.hi):
            raise ValueError("box corners differ in dimension")
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise ValueError(f"box corner {self.lo} exceeds {self.hi}")

    @classmethod
    def point(cls, s: Sequence[int]) -> "Hyperrectangle":
        t = tuple(int(v) for v in s)
        return cls(t, t)

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    def contains(self, s: Sequence[int]) -> bool:
        return all(a <= v <= b for a, v, b in zip(self.lo, s, self.hi))


def shift_rect(r: Hyperrectangle, column: Sequence[int], label: int) -> Hyperrectangle:
    if not label:
        return r
    col = [int(v) for v in column]
    return Hyperrectangle(tuple(a + c for a, c in zip(r.lo, col)), tuple(b + c for b, c in zip(r.hi, col)))


def merge_rects(r1: Hyperrectangle, r2: Hyperrectangle) -> Hyperrectangle:
    if len(r1.lo) != len(r2.lo):
        raise ValueError("cannot merge boxes of different dimension")
    return Hyperrectangle(tuple(map(min, r1.lo, r2.lo)), tuple(map(max, r1.hi, r2.hi)))


def prune_infeasible_rect(inst: BilevelInstance, r: Hyperrectangle, slack: Sequence[int] | None = None,
                          floor: np.ndarray | None = None) -> bool:
    """True when no state in the box (optionally lifted by ``slack``) can admit a follower response."""
    floor = state_floor(inst) if floor is None else floor
    hi = np.array(r.hi, dtype=np.int64)
    if slack is not None:
        hi = hi + np.asarray(slack, dtype=np.int64)
    return bool(np.any(hi < floor))


# selector(layer, boxes, longest_paths) -> partition of range(len(boxes)) into groups
Selector = Callable[[int, list[Hyperrectangle], list[float]], list[list[int]]]


@dataclass(frozen=True)
class MergePolicy:
    """How to keep layers within ``budget`` nodes (``None`` disables merging).

    ``strategy`` is ``"longest_path"`` (sort by decreasing longest root path
    under the leader costs, ties by ``lo``, then merge consecutive pairs) or
    ``"first_pair"`` (consecutive pairs in generation order).  A ``selector``
    overrides both by returning the groups to merge explicitly.
    """

    budget: int | None = 50
    strategy: str = "longest_path"
    selector: Selector | None = None
    order: str = "native"

    def __post_init__(self) -> None:
        if self.budget is not None and self.budget < 1:
            raise ValueError("budget must be at least 1")
        if self.strategy not in ("longest_path", "first_pair"):
            raise ValueError(f"unknown merge strategy {self.strategy!r}")


def _pairwise_groups(order: list[int], excess: int) -> list[list[int]]:
    """Merge consecutive pairs along ``order`` until ``excess`` merges were made."""
    groups: list[list[int]] = []
    k = 0
    while k < len(order):
        if excess > 0 and k + 1 < len(order):
            groups.append([order[k], order[k + 1]])
            excess -= 1
            k += 2
        else:
            groups.append([order[k]])
            k += 1
    return groups


def _merge_layer(boxes: list[Hyperrectangle], lps: list[float], policy: MergePolicy,
                 layer: int) -> list[list[int]]:
    budget = policy.budget
    if budget is None or len(boxes) <= budget:
        return [[i] for i in range(len(boxes))]
    if policy.selector is not None:
        groups = policy.selector(layer, list(boxes), list(lps))
        flat = sorted(i for g in groups for i in g)
        if flat != list(range(len(boxes))) or len(groups) > budget:
            raise ValueError(f"selector returned an invalid partition for layer {layer}")
        return groups
    # each round halves at most; repeat on the merged layer until it fits
    groups = [[i] for i in range(len(boxes))]
    while len(groups) > budget:
        hulls = []
        for g in groups:
            box = boxes[g[0]]
            for i in g[1:]:
                box = merge_rects(box, boxes[i])
            hulls.append(box)
        glp = [max(lps[i] for i in g) for g in groups]
        idx = list(range(len(groups)))
        if policy.strategy == "longest_path":
            idx.sort(key=lambda k: (-glp[k], hulls[k].lo, hulls[k].hi))
        merged = _pairwise_groups(idx, len(groups) - budget)
        groups = [sorted(i for k in pair for i in groups[k]) for pair in merged]
    return groups


def build_approx(inst: BilevelInstance, policy: MergePolicy, oracle: FollowerOracle | None = None,
                 fallback_value: float | None = None, reduce_output: bool = True) -> ValueNetwork:
    """Approximate network of box nodes with at most ``policy.budget`` nodes per layer.

    ``fallback_value`` is used for a terminal whose ``lo`` corner is
    follower-infeasible while ``hi`` is not; it must bound the follower value
    of every feasible leader decision (a big-M).  Without it the sum of the
    positive follower costs is used.
    """
    oracle = oracle or FollowerOracle(inst)
    order = variable_order(inst, policy.order)
    A = np.asarray(inst.A, dtype=np.int64)
    floor = state_floor(inst)
    gain = remaining_gain(inst, order)
    if fallback_value is None:
        fallback_value = math.fsum(max(float(v), 0.0) for v in inst.d)
    origin = Hyperrectangle.point([0] * inst.m)
    boxes: list[Hyperrectangle] = [origin]
    lps: list[float] = [0.0]
    arcs: list[np.ndarray] = []
    annotations: list[list[tuple]] = [[(origin,)]]
    widths_before = [1]
    for j, var in enumerate(order):
        col = A[:, var]
        index: dict[Hyperrectangle, int] = {}
        nxt: list[Hyperrectangle] = []
        nxt_lp: list[float] = []
        a = np.full((len(boxes), 2), -1, dtype=np.int64)
        for i, box in enumerate(boxes):
            for label in (0, 1):
                child = shift_rect(box, col, label)
                if prune_infeasible_rect(inst, child, gain[j + 1], floor):
                    continue
                k = index.get(child)
                length = lps[i] + (float(inst.c[var]) if label else 0.0)
                if k is None:
                    k = index[child] = len(nxt)
                    nxt.append(child)
                    nxt_lp.append(length)
                else:
                    nxt_lp[k] = max(nxt_lp[k], length)
                a[i, label] = k
        groups = _merge_layer(nxt, nxt_lp, policy, j + 1)
        merged_boxes, merged_lp, remap = [], [], np.empty(len(nxt), dtype=np.int64)
        hull_index: dict[Hyperrectangle, int] = {}
        for g in groups:
            box = nxt[g[0]]
            for i in g[1:]:
                box = merge_rects(box, nxt[i])
            k = hull_index.get(box)
            if k is None:
                k = hull_index[box] = len(merged_boxes)
                merged_boxes.append(box)
                merged_lp.append(max(nxt_lp[i] for i in g))
            else:
                merged_lp[k] = max(merged_lp[k], max(nxt_lp[i] for i in g))
            remap[g] = k
        widths_before.append(len(merged_boxes))
        arcs.append(np.where(a >= 0, remap[np.maximum(a, 0)], -1) if len(nxt) else a)
        boxes, lps = merged_boxes, merged_lp
        annotations.append([(b,) for b in boxes])
    values: list[float] = []
    fallback_used = 0
    for box in boxes:
        low = oracle.phibar(box.lo)
        if low.feasible:
            values.append(low.value)
        elif oracle.phibar(box.hi).feasible:
            values.append(float(fallback_value))
            fallback_used += 1
        else:
            values.append(math.nan)
    # terminals with every contained state infeasible are dropped
    dead = [k for k, v in enumerate(values) if math.isnan(v)]
    if dead:
        keep = np.array([not math.isnan(v) for v in values])
        remap = np.full(len(values), -1, dtype=np.int64)
        remap[keep] = np.arange(int(keep.sum()))
        if arcs:
            arcs[-1] = np.where(arcs[-1] >= 0, remap[np.maximum(arcs[-1], 0)], -1)
        values = [v for v in values if not math.isnan(v)]
        annotations[-1] = [ann for ann, k in zip(annotations[-1], keep) if k]
    meta = {"kind": "approx", "budget": policy.budget, "widths_before_reduce": widths_before,
            "fallback_terminals": fallback_used}
    if not values:
        net = empty_network(inst.n_l, order)
        net.meta.update(meta)
        return net
    net = prune(ValueNetwork(arcs, values, order, annotations, meta))
    return reduce(net) if reduce_output else net


def terminal_boxes(net: ValueNetwork, t: int) -> list[Hyperrectangle]:
    return [a for a in net.terminal_annotations(t) if isinstance(a, Hyperrectangle)]

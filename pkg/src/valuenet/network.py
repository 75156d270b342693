"""Layered value networks: state-based construction, reduction and evaluation.

A network over ``n`` leader variables has ``n + 1`` layers.  Layer 0 holds the
root, layer ``n`` the terminals.  ``arcs[j][i, label]`` is the index of the
child in layer ``j + 1`` reached from node ``i`` of layer ``j`` along the edge
labeled ``label`` (``-1`` when the edge is absent).  Terminal ``t`` carries the
value ``values[t]``.  Nodes may carry annotations (states or boxes); merged
nodes keep the concatenation of their annotations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .follower import FollowerOracle, state_floor
from .instance import BilevelInstance

DEFAULT_NODE_CAP = 5_000_000


class NetworkTooLarge(RuntimeError):
    """The exact network would exceed the configured node cap."""


@dataclass
class ValueNetwork:
    arcs: list[np.ndarray]
    values: list[float]
    order: tuple[int, ...]
    annotations: list[list[tuple[Any, ...]]] | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return len(self.arcs)

    @property
    def widths(self) -> tuple[int, ...]:
        if self.is_empty:
            return tuple(0 for _ in range(self.n_vars + 1))
        return tuple(a.shape[0] for a in self.arcs) + (len(self.values),)

    @property
    def is_empty(self) -> bool:
        return len(self.values) == 0

    @property
    def num_nodes(self) -> int:
        return sum(self.widths)

    @property
    def num_edges(self) -> int:
        return int(sum(int((a >= 0).sum()) for a in self.arcs))

    @property
    def num_terminals(self) -> int:
        return len(self.values)

    def edges(self):
        """Yield ``(layer, source, label, target)`` for every edge."""
        for j, a in enumerate(self.arcs):
            for i in range(a.shape[0]):
                for label in (0, 1):
                    t = int(a[i, label])
                    if t >= 0:
                        yield j, i, label, t

    def lookup(self, x: Sequence[int]) -> float:
        """Terminal value along the path labeled ``x`` (``inf`` when the path is missing)."""
        if len(x) != self.n_vars:
            raise ValueError(f"expected {self.n_vars} labels, got {len(x)}")
        if self.is_empty:
            return math.inf
        node = 0
        for j, var in enumerate(self.order):
            node = int(self.arcs[j][node, int(x[var])])
            if node < 0:
                return math.inf
        return self.values[node]

    def lookup_many(self, X: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`lookup` over the rows of ``X``."""
        X = np.asarray(X, dtype=np.int64)
        out = np.full(X.shape[0], math.inf)
        if self.is_empty:
            return out
        node = np.zeros(X.shape[0], dtype=np.int64)
        alive = np.ones(X.shape[0], dtype=bool)
        for j, var in enumerate(self.order):
            nxt = np.full(X.shape[0], -1, dtype=np.int64)
            nxt[alive] = self.arcs[j][node[alive], X[alive, var]]
            alive &= nxt >= 0
            node = np.where(alive, nxt, 0)
        vals = np.asarray(self.values, dtype=float)
        out[alive] = vals[node[alive]]
        return out

    def terminal_annotations(self, t: int) -> tuple[Any, ...]:
        if self.annotations is None:
            return ()
        return self.annotations[self.n_vars][t]


def lookup_value(net: ValueNetwork, x: Sequence[int]) -> float:
    return net.lookup(x)


def variable_order(inst: BilevelInstance, rule: str = "native") -> tuple[int, ...]:
    """Layer order of leader variables: ``native`` or ``coef_sum`` (ascending column sums of A)."""
    if rule == "native":
        return tuple(range(inst.n_l))
    if rule == "coef_sum":
        sums = np.asarray(inst.A, dtype=np.int64).sum(axis=0)
        return tuple(int(k) for k in np.argsort(sums, kind="stable"))
    raise ValueError(f"unknown variable order {rule!r}")


def remaining_gain(inst: BilevelInstance, order: Sequence[int]) -> np.ndarray:
    """``gain[j]`` is the largest componentwise increase still possible after layer ``j``."""
    A = np.asarray(inst.A, dtype=np.int64)
    pos = np.clip(A[:, list(order)], 0, None)
    gain = np.zeros((len(order) + 1, inst.m), dtype=np.int64)
    for j in range(len(order) - 1, -1, -1):
        gain[j] = gain[j + 1] + pos[:, j]
    return gain


def enumerate_state_layers(inst: BilevelInstance, oracle: FollowerOracle | None = None,
                           order: Sequence[int] | None = None,
                           node_cap: int = DEFAULT_NODE_CAP) -> list[list[tuple[int, ...]]]:
    """Reachable states per layer, keeping only states with a feasible completion."""
    order = tuple(range(inst.n_l)) if order is None else tuple(order)
    oracle = oracle or FollowerOracle(inst)
    A = np.asarray(inst.A, dtype=np.int64)
    floor = state_floor(inst)
    gain = remaining_gain(inst, order)
    layers: list[list[tuple[int, ...]]] = [[tuple([0] * inst.m)]]
    total = 1
    for j, var in enumerate(order):
        col = A[:, var]
        nxt: dict[tuple[int, ...], None] = {}
        for s in layers[-1]:
            for label in (0, 1):
                t = tuple(int(v) for v in (np.array(s, dtype=np.int64) + col * label))
                # no completion can lift a component that is already out of reach
                if np.any(np.array(t) + gain[j + 1] < floor):
                    continue
                nxt.setdefault(t, None)
        total += len(nxt)
        if total > node_cap:
            raise NetworkTooLarge(
                f"exact network exceeds {node_cap} nodes at layer {j + 1}; use the approximate builder")
        layers.append(list(nxt))
    # backward sweep: keep states that reach a feasible terminal
    alive = {s for s in layers[-1] if oracle.phibar(s).feasible}
    layers[-1] = [s for s in layers[-1] if s in alive]
    for j in range(inst.n_l - 1, -1, -1):
        col = tuple(int(v) for v in A[:, order[j]])
        keep = []
        for s in layers[j]:
            up = tuple(a + b for a, b in zip(s, col))
            if s in alive or up in alive:
                keep.append(s)
        alive = set(keep)
        layers[j] = keep
    return layers


def build_state_network(inst: BilevelInstance, oracle: FollowerOracle | None = None,
                        order: Sequence[int] | None = None,
                        node_cap: int = DEFAULT_NODE_CAP) -> ValueNetwork:
    """Exact network whose nodes are the reachable interaction states."""
    order = tuple(range(inst.n_l)) if order is None else tuple(order)
    oracle = oracle or FollowerOracle(inst)
    layers = enumerate_state_layers(inst, oracle, order, node_cap)
    A = np.asarray(inst.A, dtype=np.int64)
    if not layers[-1]:
        return empty_network(inst.n_l, order)
    index = [{s: i for i, s in enumerate(layer)} for layer in layers]
    arcs = []
    for j, var in enumerate(order):
        col = tuple(int(v) for v in A[:, var])
        a = np.full((len(layers[j]), 2), -1, dtype=np.int64)
        for i, s in enumerate(layers[j]):
            a[i, 0] = index[j + 1].get(s, -1)
            a[i, 1] = index[j + 1].get(tuple(p + q for p, q in zip(s, col)), -1)
        arcs.append(a)
    values = [oracle.phibar(s).value for s in layers[-1]]
    annotations = [[(s,) for s in layer] for layer in layers]
    return ValueNetwork(arcs, values, order, annotations, {"kind": "exact"})


def empty_network(n_vars: int, order: Sequence[int] | None = None) -> ValueNetwork:
    order = tuple(range(n_vars)) if order is None else tuple(order)
    arcs = [np.zeros((0, 2), dtype=np.int64) for _ in range(n_vars)]
    return ValueNetwork(arcs, [], order, [[] for _ in range(n_vars + 1)], {"kind": "empty"})


def _regroup(keys: Sequence[Any]) -> tuple[np.ndarray, list[int]]:
    """Map equal keys to one class, numbered by first occurrence."""
    classes: dict[Any, int] = {}
    mapping = np.empty(len(keys), dtype=np.int64)
    firsts: list[int] = []
    for i, key in enumerate(keys):
        cls = classes.get(key)
        if cls is None:
            cls = classes[key] = len(firsts)
            firsts.append(i)
        mapping[i] = cls
    return mapping, firsts


def _merge_annotations(ann: list[tuple[Any, ...]], mapping: np.ndarray, size: int) -> list[tuple[Any, ...]]:
    merged: list[list[Any]] = [[] for _ in range(size)]
    for i, cls in enumerate(mapping):
        merged[cls].extend(ann[i])
    return [tuple(m) for m in merged]


def merge_equal_terminals(net: ValueNetwork) -> ValueNetwork:
    """Merge terminals that carry the same value, leaving upper layers untouched."""
    if net.is_empty:
        return net
    mapping, firsts = _regroup(net.values)
    arcs = [a.copy() for a in net.arcs]
    if arcs:
        last = arcs[-1]
        arcs[-1] = np.where(last >= 0, mapping[np.maximum(last, 0)], -1)
    annotations = None
    if net.annotations is not None:
        annotations = [list(layer) for layer in net.annotations]
        annotations[-1] = _merge_annotations(net.annotations[-1], mapping, len(firsts))
    return ValueNetwork(arcs, [net.values[i] for i in firsts], net.order, annotations, dict(net.meta))


def reduce(net: ValueNetwork) -> ValueNetwork:
    """Merge equal-valued terminals, then bottom-up merge nodes with identical outgoing edges."""
    if net.is_empty:
        return net
    mapping, firsts = _regroup(net.values)
    values = [net.values[i] for i in firsts]
    ann = net.annotations
    new_ann: list[list[tuple[Any, ...]]] | None = None
    if ann is not None:
        new_ann = [[] for _ in range(net.n_vars + 1)]
        new_ann[net.n_vars] = _merge_annotations(ann[net.n_vars], mapping, len(firsts))
    new_arcs: list[np.ndarray] = [np.zeros((0, 2), dtype=np.int64)] * net.n_vars
    for j in range(net.n_vars - 1, -1, -1):
        a = net.arcs[j]
        relabeled = np.where(a >= 0, mapping[np.maximum(a, 0)], -1)
        keys = [(int(r[0]), int(r[1])) for r in relabeled]
        mapping, firsts = _regroup(keys)
        new_arcs[j] = relabeled[firsts] if firsts else np.zeros((0, 2), dtype=np.int64)
        if new_ann is not None:
            new_ann[j] = _merge_annotations(ann[j], mapping, len(firsts))
    meta = dict(net.meta)
    meta["reduced"] = True
    return ValueNetwork(new_arcs, values, net.order, new_ann, meta)


def prune(net: ValueNetwork) -> ValueNetwork:
    """Drop nodes that cannot reach a terminal or cannot be reached from the root."""
    if net.is_empty:
        return net
    n = net.n_vars
    useful = [np.zeros(w, dtype=bool) for w in net.widths]
    useful[n][:] = True
    for j in range(n - 1, -1, -1):
        a = net.arcs[j]
        ok = np.zeros(a.shape[0], dtype=bool)
        for label in (0, 1):
            t = a[:, label]
            ok |= (t >= 0) & useful[j + 1][np.maximum(t, 0)] if useful[j + 1].size else np.zeros_like(ok)
        useful[j] = ok
    if not useful[0].any():
        return empty_network(n, net.order)
    reach = [np.zeros(w, dtype=bool) for w in net.widths]
    reach[0][0] = True
    for j in range(n):
        a = net.arcs[j]
        for label in (0, 1):
            t = a[:, label]
            sel = reach[j] & useful[j] & (t >= 0)
            sel_t = t[sel]
            sel_t = sel_t[useful[j + 1][sel_t]]
            reach[j + 1][sel_t] = True
    keep = [r & u for r, u in zip(reach, useful)]
    remap = []
    for k in keep:
        r = np.full(k.shape[0], -1, dtype=np.int64)
        r[k] = np.arange(int(k.sum()))
        remap.append(r)
    arcs = []
    for j in range(n):
        a = net.arcs[j][keep[j]]
        a = np.where(a >= 0, remap[j + 1][np.maximum(a, 0)], -1)
        arcs.append(a)
    values = [v for v, k in zip(net.values, keep[n]) if k]
    annotations = None
    if net.annotations is not None:
        annotations = [[ann for ann, k in zip(layer, keep[j]) if k] for j, layer in enumerate(net.annotations)]
    return ValueNetwork(arcs, values, net.order, annotations, dict(net.meta))


def canonical_form(net: ValueNetwork) -> tuple:
    """Hashable encoding that is identical for isomorphic reduced networks."""
    if net.is_empty:
        return ("empty", net.n_vars, net.order)
    n = net.n_vars
    perm = np.argsort(np.asarray(net.values, dtype=float), kind="stable")
    rank = np.empty(len(perm), dtype=np.int64)
    rank[perm] = np.arange(len(perm))
    encoded = [tuple(float(net.values[i]) for i in perm)]
    for j in range(n - 1, -1, -1):
        a = net.arcs[j]
        sigs = [tuple(int(rank[t]) if t >= 0 else -1 for t in row) for row in a]
        order = sorted(range(len(sigs)), key=lambda i: sigs[i])
        rank = np.empty(len(sigs), dtype=np.int64)
        rank[order] = np.arange(len(sigs))
        encoded.append(tuple(sigs[i] for i in order))
    return (net.order, tuple(encoded))


def isomorphic(n1: ValueNetwork, n2: ValueNetwork) -> bool:
    return canonical_form(n1) == canonical_form(n2)


def completion_sets(net: ValueNetwork) -> list[list[frozenset]]:
    """Per node, the set of (suffix labels, terminal value) pairs; exponential in depth."""
    n = net.n_vars
    comp: list[list[frozenset]] = [[] for _ in range(n + 1)]
    comp[n] = [frozenset({((), v)}) for v in net.values]
    for j in range(n - 1, -1, -1):
        layer = []
        for row in net.arcs[j]:
            items = set()
            for label in (0, 1):
                t = int(row[label])
                if t >= 0:
                    items.update(((label,) + suffix, v) for suffix, v in comp[j + 1][t])
            layer.append(frozenset(items))
        comp[j] = layer
    return comp


def find_symmetric_pair(net: ValueNetwork) -> tuple[tuple[int, int], tuple[int, int]] | None:
    """Two same-layer nodes with identical completions, as ``((layer, i), (layer, k))``."""
    if net.is_empty:
        return None
    comp = completion_sets(net)
    for j in range(net.n_vars, -1, -1):
        seen: dict[frozenset, int] = {}
        for i, c in enumerate(comp[j]):
            if c in seen:
                return (j, seen[c]), (j, i)
            seen[c] = i
    return None


def minimal_widths(net: ValueNetwork) -> tuple[int, ...]:
    """Smallest possible layer widths, counted as distinct completion sets per layer."""
    if net.is_empty:
        return net.widths
    return tuple(len(set(layer)) for layer in completion_sets(net))


def _format_annotation(item: Any) -> str:
    if hasattr(item, "lo") and hasattr(item, "hi"):
        return f"{tuple(item.lo)},{tuple(item.hi)}"
    return str(tuple(item)) if isinstance(item, tuple) else str(item)


def to_dot(net: ValueNetwork, name: str = "network") -> str:
    """Graphviz text: dashed edges carry label 0, solid edges label 1."""
    lines = [f'digraph "{name}" {{', "  rankdir=TB;", "  node [shape=circle, fontsize=10];"]
    for j, w in enumerate(net.widths):
        ids = []
        for i in range(w):
            label = ""
            if net.annotations is not None and net.annotations[j][i]:
                label = " | ".join(_format_annotation(a) for a in net.annotations[j][i][:3])
                if len(net.annotations[j][i]) > 3:
                    label += " | ..."
            if j == net.n_vars:
                label = f"{label}\\nvalue {net.values[i]:g}" if label else f"{net.values[i]:g}"
            ids.append(f"u{j}_{i}")
            lines.append(f'  u{j}_{i} [label="{label or f"u{j}_{i}"}"];')
        if ids:
            lines.append("  { rank=same; " + "; ".join(ids) + "; }")
    for j, i, label, t in net.edges():
        style = "dashed" if label == 0 else "solid"
        lines.append(f"  u{j}_{i} -> u{j + 1}_{t} [style={style}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def network_stats(net: ValueNetwork, before: ValueNetwork | None = None) -> dict[str, Any]:
    stats: dict[str, Any] = {
        "widths": list(net.widths),
        "nodes": net.num_nodes,
        "edges": net.num_edges,
        "terminals": net.num_terminals,
        "max_width": max(net.widths) if net.widths else 0,
    }
    if before is not None and before.num_nodes:
        stats["nodes_before_reduce"] = before.num_nodes
        stats["reduction_ratio"] = 1.0 - net.num_nodes / before.num_nodes
    return stats

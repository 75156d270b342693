"""Path-flow formulation of a value network.

One flow variable per edge.  A unit of flow leaves the root, is conserved at
inner nodes, and each layer's label-1 flow equals the matching leader
variable.  The objective variable ``z`` equals the value of the terminal the
flow reaches, so integral leader decisions pin ``z`` to the network value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .milp import MilpModel
from .network import ValueNetwork


@dataclass
class FlowPolytope:
    model: MilpModel
    x_vars: list[int]
    z_var: int | None
    edge_vars: dict[tuple[int, int, int], int] = field(default_factory=dict)
    rows: dict[str, list[int]] = field(default_factory=dict)
    infeasible: bool = False

    @property
    def num_flow_vars(self) -> int:
        return len(self.edge_vars)

    @property
    def num_rows(self) -> int:
        return sum(len(v) for v in self.rows.values())


def _leader_vars(model: MilpModel, n: int, relax: bool) -> list[int]:
    return [model.add_var(f"x{k}", 0.0, 1.0, binary=not relax) for k in range(n)]


def build_flow_polytope(net: ValueNetwork, model: MilpModel | None = None,
                        x_vars: Sequence[int] | None = None, z_var: int | None = None,
                        relax_x: bool = False, with_value: bool = True,
                        terminal: int | None = None, prefix: str = "w") -> FlowPolytope:
    """Append the flow system of ``net`` to ``model``.

    Row groups: ``root`` (unit outflow), ``balance`` (conservation at inner
    nodes), ``sink`` (each terminal absorbs at most the unit flow), ``layer``
    (label-1 flow equals the leader variable) and ``value`` (``z`` equals the
    flow-weighted terminal value).  With ``terminal`` set, only edges on paths
    into that terminal are kept and no value row is emitted.
    """
    model = model if model is not None else MilpModel("flow")
    xs = list(x_vars) if x_vars is not None else _leader_vars(model, net.n_vars, relax_x)
    if with_value and terminal is None and z_var is None:
        z_var = model.add_var("z", -math.inf, math.inf)
    poly = FlowPolytope(model, xs, z_var if terminal is None else None,
                        rows={"root": [], "balance": [], "sink": [], "layer": [], "value": []})
    if net.is_empty:
        poly.rows["root"].append(model.add_constr([], "==", 1.0, name=f"{prefix}_empty"))
        poly.infeasible = True
        return poly
    n = net.n_vars
    keep = _ancestors(net, terminal)
    for j, i, label, t in net.edges():
        if keep is not None and not (keep[j + 1][t] and keep[j][i]):
            continue
        poly.edge_vars[(j, i, label)] = model.add_var(f"{prefix}_{j}_{i}_{label}", 0.0, math.inf)
    out_edges: dict[tuple[int, int], list[int]] = {}
    in_edges: dict[tuple[int, int], list[int]] = {}
    for (j, i, label), var in poly.edge_vars.items():
        out_edges.setdefault((j, i), []).append(var)
        in_edges.setdefault((j + 1, int(net.arcs[j][i, label])), []).append(var)
    rows = poly.rows
    rows["root"].append(model.add_constr([(v, 1.0) for v in out_edges.get((0, 0), [])], "==", 1.0,
                                         name=f"{prefix}_root"))
    for j in range(1, n):
        for i in range(net.widths[j]):
            if keep is not None and not keep[j][i]:
                continue
            terms = [(v, 1.0) for v in out_edges.get((j, i), [])] + [(v, -1.0) for v in in_edges.get((j, i), [])]
            rows["balance"].append(model.add_constr(terms, "==", 0.0, name=f"{prefix}_bal_{j}_{i}"))
    for t in range(net.num_terminals):
        if keep is not None and not keep[n][t]:
            continue
        if n == 0:
            break
        rows["sink"].append(model.add_constr([(v, 1.0) for v in in_edges.get((n, t), [])], "<=", 1.0,
                                             name=f"{prefix}_sink_{t}"))
    for j, var in enumerate(net.order):
        terms = [(v, 1.0) for (jj, _, label), v in poly.edge_vars.items() if jj == j and label == 1]
        terms.append((xs[var], -1.0))
        rows["layer"].append(model.add_constr(terms, "==", 0.0, name=f"{prefix}_layer_{j}"))
    if poly.z_var is not None:
        terms = [(poly.z_var, 1.0)]
        for t in range(net.num_terminals):
            terms.extend((v, -float(net.values[t])) for v in in_edges.get((n, t), []))
        rows["value"].append(model.add_constr(terms, "==", 0.0, name=f"{prefix}_value"))
    return poly


def _ancestors(net: ValueNetwork, terminal: int | None):
    """Per-layer masks of nodes with a path into ``terminal`` (``None`` keeps everything)."""
    if terminal is None:
        return None
    n = net.n_vars
    keep = [[False] * w for w in net.widths]
    keep[n][terminal] = True
    for j in range(n - 1, -1, -1):
        for i in range(net.widths[j]):
            keep[j][i] = any(int(net.arcs[j][i, lab]) >= 0 and keep[j + 1][int(net.arcs[j][i, lab])]
                             for lab in (0, 1))
    return keep

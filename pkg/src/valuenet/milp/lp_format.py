"""CPLEX LP-format text export for cross-checking models with external solvers."""

from __future__ import annotations

import math
import re

from .model import MilpModel, Sense

_SAFE = re.compile(r"[^A-Za-z0-9_.]")


def _name(raw: str) -> str:
    name = _SAFE.sub("_", raw)
    return name if name and not name[0].isdigit() and name[0] != "." else "_" + name


def _expr(pairs, names) -> str:
    parts = []
    for idx, coef in pairs:
        if coef == 0:
            continue
        sign = "-" if coef < 0 else "+"
        parts.append(f"{sign} {abs(coef)!r} {names[idx]}")
    if not parts:
        return "0"
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def to_lp_format(model: MilpModel) -> str:
    names = [_name(v.name) for v in model.variables]
    # disambiguate names that collide after sanitizing
    seen: dict[str, int] = {}
    for k, nm in enumerate(names):
        if nm in seen:
            names[k] = f"{nm}_{k}"
        seen[names[k]] = k
    lines = [f"\\ model {model.name}", "Minimize", " obj: " + _expr(sorted(model.objective.items()), names)]
    if model.obj_constant:
        lines[-1] += f" + {model.obj_constant!r} __const"
    lines.append("Subject To")
    ops = {Sense.LE: "<=", Sense.GE: ">=", Sense.EQ: "="}
    for con in model.constraints:
        body = _expr(zip(con.indices.tolist(), con.values.tolist()), names)
        lines.append(f" {_name(con.name)}: {body} {ops[con.sense]} {con.rhs!r}")
    lines.append("Bounds")
    for var, nm in zip(model.variables, names):
        lo = "-inf" if math.isinf(var.lb) else repr(var.lb)
        hi = "+inf" if math.isinf(var.ub) else repr(var.ub)
        lines.append(f" {lo} <= {nm} <= {hi}")
    if model.obj_constant:
        lines.append(" __const = 1")
    binaries = [nm for var, nm in zip(model.variables, names) if var.binary]
    if binaries:
        lines.append("Binaries")
        lines.extend(f" {nm}" for nm in binaries)
    lines.append("End")
    return "\n".join(lines) + "\n"

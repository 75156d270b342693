"""Linear constraint systems with binary marks, and solve results."""

from __future__ import annotations

import copy
import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy import sparse

FEAS_TOL = 1e-6
INT_TOL = 1e-6


class Sense(str, enum.Enum):
    LE = "<="
    GE = ">="
    EQ = "=="

    @classmethod
    def parse(cls, value: "Sense | str") -> "Sense":
        if isinstance(value, Sense):
            return value
        aliases = {"<=": cls.LE, "<": cls.LE, "L": cls.LE, ">=": cls.GE, ">": cls.GE,
                   "G": cls.GE, "==": cls.EQ, "=": cls.EQ, "E": cls.EQ}
        try:
            return aliases[value]
        except KeyError:
            raise ValueError(f"unknown constraint sense {value!r}") from None


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    LIMIT_REACHED = "LimitReached"
    NUMERICAL_ERROR = "NumericalError"


@dataclass
class Variable:
    name: str
    lb: float = 0.0
    ub: float = math.inf
    binary: bool = False


@dataclass
class Constraint:
    indices: np.ndarray
    values: np.ndarray
    sense: Sense
    rhs: float
    name: str = ""


Terms = Mapping[int, float] | Iterable[tuple[int, float]]


def _terms(terms: Terms) -> tuple[np.ndarray, np.ndarray]:
    items = terms.items() if isinstance(terms, Mapping) else terms
    merged: dict[int, float] = {}
    for idx, val in items:
        merged[int(idx)] = merged.get(int(idx), 0.0) + float(val)
    keys = sorted(k for k, v in merged.items() if v != 0.0)
    return np.array(keys, dtype=np.int64), np.array([merged[k] for k in keys], dtype=np.float64)


class MilpModel:
    """A minimization model ``min c x + c0`` over linear rows and variable bounds."""

    def __init__(self, name: str = "model") -> None:
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective: dict[int, float] = {}
        self.obj_constant = 0.0
        self.warm_start: dict[int, float] | None = None

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def add_var(self, name: str | None = None, lb: float = 0.0, ub: float = math.inf,
                binary: bool = False, obj: float = 0.0) -> int:
        if binary:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        idx = len(self.variables)
        self.variables.append(Variable(name or f"v{idx}", float(lb), float(ub), binary))
        if obj:
            self.objective[idx] = float(obj)
        return idx

    def add_vars(self, count: int, prefix: str, lb: float = 0.0, ub: float = math.inf,
                 binary: bool = False) -> list[int]:
        return [self.add_var(f"{prefix}{k}", lb, ub, binary) for k in range(count)]

    def add_constr(self, terms: Terms, sense: Sense | str, rhs: float, name: str = "") -> int:
        idx, val = _terms(terms)
        if idx.size and (idx.min() < 0 or idx.max() >= self.num_vars):
            raise IndexError(f"constraint {name or len(self.constraints)} references an undeclared variable")
        self.constraints.append(Constraint(idx, val, Sense.parse(sense), float(rhs), name or f"r{len(self.constraints)}"))
        return len(self.constraints) - 1

    def set_objective(self, terms: Terms, constant: float = 0.0) -> None:
        idx, val = _terms(terms)
        self.objective = {int(i): float(v) for i, v in zip(idx, val)}
        self.obj_constant = float(constant)

    def copy(self) -> "MilpModel":
        return copy.deepcopy(self)

    def relaxed(self) -> "MilpModel":
        out = self.copy()
        for var in out.variables:
            var.binary = False
        return out

    def validate(self) -> list[str]:
        issues = []
        for k, var in enumerate(self.variables):
            if var.lb > var.ub:
                issues.append(f"variable {var.name} has lb {var.lb} > ub {var.ub}")
        for con in self.constraints:
            if con.indices.size and con.indices.max() >= self.num_vars:
                issues.append(f"constraint {con.name} references an undeclared variable")
        return issues

    # dense/sparse views used by the backends

    def cost_vector(self) -> np.ndarray:
        c = np.zeros(self.num_vars)
        for k, v in self.objective.items():
            c[k] = v
        return c

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lb = np.array([v.lb for v in self.variables], dtype=np.float64)
        ub = np.array([v.ub for v in self.variables], dtype=np.float64)
        return lb, ub

    def binary_mask(self) -> np.ndarray:
        return np.array([v.binary for v in self.variables], dtype=bool)

    def matrix(self) -> sparse.csr_matrix:
        rows, cols, vals = [], [], []
        for r, con in enumerate(self.constraints):
            rows.extend([r] * len(con.indices))
            cols.extend(con.indices.tolist())
            vals.extend(con.values.tolist())
        return sparse.csr_matrix((vals, (rows, cols)), shape=(self.num_constraints, self.num_vars))

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.full(self.num_constraints, -np.inf)
        hi = np.full(self.num_constraints, np.inf)
        for r, con in enumerate(self.constraints):
            if con.sense in (Sense.GE, Sense.EQ):
                lo[r] = con.rhs
            if con.sense in (Sense.LE, Sense.EQ):
                hi[r] = con.rhs
        return lo, hi

    def evaluate(self, x: np.ndarray) -> float:
        return float(self.cost_vector() @ x) + self.obj_constant

    def violations(self, x: np.ndarray, tol: float = FEAS_TOL, integrality: bool = True) -> list[str]:
        """Rows, bounds and binary marks violated by ``x`` beyond ``tol`` (scaled by row size)."""
        out = []
        lb, ub = self.bounds()
        for k in np.nonzero((x < lb - tol) | (x > ub + tol))[0]:
            out.append(f"bound of {self.variables[k].name}: {x[k]}")
        if integrality:
            mask = self.binary_mask()
            frac = np.abs(x - np.round(x))
            for k in np.nonzero(mask & (frac > INT_TOL))[0]:
                out.append(f"integrality of {self.variables[k].name}: {x[k]}")
        for con in self.constraints:
            act = float(con.values @ x[con.indices]) if con.indices.size else 0.0
            scale = 1.0 + max(abs(con.rhs), float(np.abs(con.values).max()) if con.values.size else 0.0)
            slack = tol * scale
            if con.sense in (Sense.GE, Sense.EQ) and act < con.rhs - slack:
                out.append(f"row {con.name}: {act} < {con.rhs}")
            if con.sense in (Sense.LE, Sense.EQ) and act > con.rhs + slack:
                out.append(f"row {con.name}: {act} > {con.rhs}")
        return out


@dataclass
class Limits:
    node_limit: int | None = None
    time_limit: float | None = None


@dataclass
class MilpSolution:
    status: Status
    objective: float | None = None
    x: np.ndarray | None = None
    bound: float | None = None
    nodes: int = 0
    message: str = ""
    duals: np.ndarray | None = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL

    def value(self, idx: int) -> float:
        if self.x is None:
            raise ValueError(f"no assignment available (status {self.status.value})")
        return float(self.x[idx])

"""Embedded LP/MILP engine.

Two backends share one model type: ``"native"`` (the in-package bounded
simplex with best-bound branch and bound) and ``"highs"`` (SciPy's HiGHS
bindings, the default for throughput).
"""

from __future__ import annotations

import logging

from .branch_bound import solve_milp_native
from .highs import solve_lp_highs, solve_milp_highs
from .lp_format import to_lp_format
from .model import FEAS_TOL, INT_TOL, Limits, MilpModel, MilpSolution, Sense, Status
from .simplex import solve_lp_native

log = logging.getLogger(__name__)

DEFAULT_BACKEND = "highs"
BACKENDS = ("highs", "native")


def _check_backend(backend: str) -> None:
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; choose from {BACKENDS}")


def _precheck(model: MilpModel) -> MilpSolution | None:
    problems = model.validate()
    if any("undeclared" in p for p in problems):
        raise ValueError("; ".join(problems))
    if problems:
        return MilpSolution(Status.INFEASIBLE, message=problems[0])
    return None


def solve_lp(model: MilpModel, backend: str = DEFAULT_BACKEND) -> MilpSolution:
    """Solve the continuous relaxation (binary marks ignored)."""
    _check_backend(backend)
    early = _precheck(model)
    if early is not None:
        return early
    return solve_lp_native(model) if backend == "native" else solve_lp_highs(model)


def solve_milp(model: MilpModel, limits: Limits | None = None, backend: str = DEFAULT_BACKEND) -> MilpSolution:
    """Solve with ``backend``; a HiGHS answer that fails verification twice is redone natively."""
    _check_backend(backend)
    early = _precheck(model)
    if early is not None:
        return early
    if backend == "native":
        return solve_milp_native(model, limits)
    sol = solve_milp_highs(model, limits)
    if sol.status is Status.NUMERICAL_ERROR:
        log.warning("HiGHS failed verification on %s (%s); using the native engine", model.name, sol.message)
        sol = solve_milp_native(model, limits)
    return sol


__all__ = [
    "BACKENDS", "DEFAULT_BACKEND", "FEAS_TOL", "INT_TOL", "Limits", "MilpModel", "MilpSolution",
    "Sense", "Status", "solve_lp", "solve_milp", "to_lp_format",
]

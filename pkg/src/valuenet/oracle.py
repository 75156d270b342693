"""Exhaustive bilevel oracle.

Leader decisions are enumerated in two halves.  Each half is collapsed to
its distinct partial keys ``(A x, Gx x)`` with the cheapest leader cost, and
the halves are combined key by key.  For each full key the follower value
and the best optimistic response follow from a table of all follower
vectors.  The result is exact for the optimistic convention.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .instance import BilevelInstance

DEFAULT_CAP = 2**40
_KEY_CHUNK = 2048


class OracleTooLarge(RuntimeError):
    """The enumeration would exceed the configured cap."""


@dataclass
class OracleResult:
    status: str
    value: float
    x: tuple[int, ...] | None
    y: tuple[int, ...] | None
    keys: int = 0
    phi: dict[tuple[int, ...], float] = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.x is not None


def _binary_table(n: int) -> np.ndarray:
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)


def _half(inst: BilevelInstance, cols: list[int]):
    X = _binary_table(len(cols))
    A = np.asarray(inst.A, dtype=np.int64)[:, cols]
    G = np.asarray(inst.Gx, dtype=float)[:, cols]
    keys = np.hstack([X @ A.T, X @ G.T]) if inst.m_L else X @ A.T
    cost = X @ np.asarray(inst.c, dtype=float)[cols]
    order = np.argsort(cost, kind="stable")
    _, first = np.unique(keys[order], axis=0, return_index=True)
    pick = order[first]
    return keys[pick].astype(float), cost[pick], X[pick]


def _combine(left, right):
    kl, cl, xl = left
    kr, cr, xr = right
    best: dict[tuple, tuple[float, int, int]] = {}
    step = max(1, _KEY_CHUNK * 64 // max(1, len(kr)))
    for start in range(0, len(kl), step):
        stop = min(len(kl), start + step)
        keys = (kl[start:stop, None, :] + kr[None, :, :]).reshape(-1, kl.shape[1])
        cost = (cl[start:stop, None] + cr[None, :]).ravel()
        order = np.argsort(cost, kind="stable")
        uniq, first = np.unique(keys[order], axis=0, return_index=True)
        for key, idx in zip(map(tuple, uniq), order[first]):
            c = float(cost[idx])
            hit = best.get(key)
            if hit is None or c < hit[0]:
                best[key] = (c, start + int(idx) // len(kr), int(idx) % len(kr))
    return best


def brute_force_bilevel(inst: BilevelInstance, cap: int = DEFAULT_CAP, record_phi: bool = False,
                        tol: float = 1e-9) -> OracleResult:
    """Exact optimistic optimum by enumeration; refuses when ``2^n_l * 2^n_f`` exceeds ``cap``."""
    if 2 ** (inst.n_l + inst.n_f) > cap:
        raise OracleTooLarge(f"enumeration of 2^{inst.n_l + inst.n_f} pairs exceeds the cap {cap}")
    half = inst.n_l // 2
    left = _half(inst, list(range(half)))
    right = _half(inst, list(range(half, inst.n_l)))
    best_keys = _combine(left, right)
    keys = np.array(list(best_keys), dtype=float).reshape(len(best_keys), -1)
    costs = np.array([v[0] for v in best_keys.values()])
    Y = _binary_table(inst.n_f)
    BY = Y @ np.asarray(inst.B, dtype=np.int64).T
    GY = Y @ np.asarray(inst.Gy, dtype=float).T if inst.m_L else np.zeros((len(Y), 0))
    dY = Y @ np.asarray(inst.d, dtype=float)
    pY = Y @ np.asarray(inst.p, dtype=float)
    b = np.asarray(inst.b, dtype=np.int64)
    h = np.asarray(inst.h, dtype=float)
    m = inst.m
    best_val, best_key, best_y = math.inf, -1, -1
    phibar_of: dict[tuple[int, ...], float] = {}
    for start in range(0, len(keys), _KEY_CHUNK):
        S = keys[start:start + _KEY_CHUNK, :m].astype(np.int64)
        Gk = keys[start:start + _KEY_CHUNK, m:]
        feas = np.all(BY[None, :, :] >= (b - S)[:, None, :], axis=2)
        phibar = np.where(feas, dY[None, :], np.inf).min(axis=1)
        if record_phi:
            for s, v in zip(map(tuple, S.tolist()), phibar):
                phibar_of[s] = float(v)
        ok = feas & (dY[None, :] <= phibar[:, None] + tol)
        if inst.m_L:
            ok &= np.all(GY[None, :, :] >= (h[None, :] - Gk)[:, None, :] - tol, axis=2)
        # stable argmin over the lexicographically ordered table picks the smallest y among ties
        score = np.where(ok, pY[None, :], np.inf)
        yi = np.argmin(score, axis=1)
        total = costs[start:start + _KEY_CHUNK] + score[np.arange(len(S)), yi]
        k = int(np.argmin(total))
        if total[k] < best_val:
            best_val, best_key, best_y = float(total[k]), start + k, int(yi[k])
    phi_table: dict[tuple[int, ...], float] = {}
    if record_phi:
        A = np.asarray(inst.A, dtype=np.int64)
        for x in _binary_table(inst.n_l):
            s = tuple(int(v) for v in A @ x)
            if s not in phibar_of:
                rhs = b - np.array(s)
                fe = np.all(BY >= rhs, axis=1)
                phibar_of[s] = float(dY[fe].min()) if fe.any() else math.inf
            phi_table[tuple(int(v) for v in x)] = phibar_of[s]
    if best_key < 0:
        return OracleResult("Infeasible", math.inf, None, None, len(keys), phi_table)
    _, li, ri = list(best_keys.values())[best_key]
    x = tuple(int(v) for v in np.concatenate([left[2][li], right[2][ri]]))
    y = tuple(int(v) for v in Y[best_y])
    value = math.fsum([float(inst.c @ np.array(x)), float(inst.p @ np.array(y))])
    return OracleResult("Optimal", value, x, y, len(keys), phi_table)


__all__ = ["DEFAULT_CAP", "OracleResult", "OracleTooLarge", "brute_force_bilevel"]

"""Bilevel instance data, validation and interaction statistics.

All interaction rows read ``A x + B y >= b`` and all leader rows read
``Gx x + Gy y >= h``; both levels minimize.  Interaction data is kept as
exact 64-bit integers so that states ``s = A x`` compare exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

INT_LIMIT = 2**62


class InstanceError(ValueError):
    """Raised when instance data cannot be represented or scaled."""


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value)
    # str() gives the shortest round-tripping decimal, so 0.1 becomes 1/10
    return Fraction(str(float(value)))


def _is_integral(values: Iterable) -> bool:
    return all(_as_fraction(v).denominator == 1 for v in values)


def _exact_array(data, ndim: int) -> np.ndarray:
    """Return an int64 array when every entry is integral, else an object array of Fractions."""
    raw = np.asarray(data, dtype=object)
    if raw.size == 0:
        return np.zeros(raw.shape if raw.ndim == ndim else (0,) * ndim, dtype=np.int64)
    fracs = np.vectorize(_as_fraction, otypes=[object])(raw)
    if all(f.denominator == 1 for f in fracs.flat) and all(abs(f) < INT_LIMIT for f in fracs.flat):
        return np.vectorize(lambda f: int(f), otypes=[np.int64])(fracs).astype(np.int64)
    return fracs


def _float_array(data, shape: tuple[int, ...] | None = None) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.size == 0 and shape is not None:
        arr = np.zeros(shape, dtype=np.float64)
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BilevelInstance:
    """Binary bilevel instance.

    Leader: ``min c x + p y`` subject to ``Gx x + Gy y >= h`` and ``y`` optimal
    for the follower ``min d y`` subject to ``A x + B y >= b``.
    """

    c: np.ndarray
    p: np.ndarray
    d: np.ndarray
    A: np.ndarray
    B: np.ndarray
    b: np.ndarray
    Gx: np.ndarray
    Gy: np.ndarray
    h: np.ndarray
    name: str = "instance"
    row_scale: tuple[int, ...] = field(default=())

    @classmethod
    def create(
        cls,
        c: Sequence,
        p: Sequence,
        d: Sequence,
        A: Sequence,
        B: Sequence,
        b: Sequence,
        Gx: Sequence | None = None,
        Gy: Sequence | None = None,
        h: Sequence | None = None,
        name: str = "instance",
        row_scale: Sequence[int] | None = None,
    ) -> "BilevelInstance":
        c_arr = _float_array(c)
        p_arr = _float_array(p)
        d_arr = _float_array(d)
        n_l, n_f = len(c_arr), len(p_arr)
        A_arr = _exact_array(A, 2)
        B_arr = _exact_array(B, 2)
        b_arr = _exact_array(b, 1)
        if A_arr.ndim == 1:
            A_arr = A_arr.reshape(0, n_l) if A_arr.size == 0 else A_arr.reshape(1, -1)
        if B_arr.ndim == 1:
            B_arr = B_arr.reshape(0, n_f) if B_arr.size == 0 else B_arr.reshape(1, -1)
        Gx_arr = _float_array([] if Gx is None else Gx)
        Gy_arr = _float_array([] if Gy is None else Gy)
        h_arr = _float_array([] if h is None else h)
        if Gx_arr.size == 0:
            Gx_arr = np.zeros((len(h_arr), n_l))
        if Gy_arr.size == 0:
            Gy_arr = np.zeros((len(h_arr), n_f))
        if Gx_arr.ndim == 1:
            Gx_arr = Gx_arr.reshape(1, -1)
        if Gy_arr.ndim == 1:
            Gy_arr = Gy_arr.reshape(1, -1)
        scale = tuple(int(v) for v in row_scale) if row_scale is not None else (1,) * len(b_arr)
        return cls(
            c=_frozen(c_arr),
            p=_frozen(p_arr),
            d=_frozen(d_arr),
            A=_frozen(A_arr),
            B=_frozen(B_arr),
            b=_frozen(b_arr),
            Gx=_frozen(Gx_arr),
            Gy=_frozen(Gy_arr),
            h=_frozen(h_arr),
            name=name,
            row_scale=scale,
        )

    @property
    def n_l(self) -> int:
        return int(self.c.shape[0])

    @property
    def n_f(self) -> int:
        return int(self.d.shape[0])

    @property
    def m(self) -> int:
        return int(self.b.shape[0])

    @property
    def m_L(self) -> int:
        return int(self.h.shape[0])

    @property
    def is_integral(self) -> bool:
        return all(arr.dtype == np.int64 for arr in (self.A, self.B, self.b))

    def state(self, x: Sequence[int]) -> tuple[int, ...]:
        """Exact interaction state ``A x`` as a tuple of Python ints."""
        xs = np.asarray(x, dtype=np.int64)
        if xs.shape != (self.n_l,):
            raise ValueError(f"expected {self.n_l} leader values, got shape {xs.shape}")
        return tuple(int(v) for v in self.A @ xs)

    def with_name(self, name: str) -> "BilevelInstance":
        return BilevelInstance(
            self.c, self.p, self.d, self.A, self.B, self.b, self.Gx, self.Gy, self.h, name, self.row_scale
        )

    def same_data(self, other: "BilevelInstance") -> bool:
        """Bit-exact equality of every array (dtype, shape and values)."""
        for key in ("c", "p", "d", "A", "B", "b", "Gx", "Gy", "h"):
            mine, theirs = getattr(self, key), getattr(other, key)
            if mine.dtype != theirs.dtype or mine.shape != theirs.shape:
                return False
            if mine.dtype == object:
                # Fraction entries: tobytes would compare object pointers
                if mine.tolist() != theirs.tolist():
                    return False
            elif mine.tobytes() != theirs.tobytes():
                return False
        return True


def validate_instance(inst: BilevelInstance) -> list[str]:
    """Return a list of violations; an empty list means the instance is usable."""
    issues: list[str] = []
    n_l, n_f, m = inst.n_l, inst.n_f, inst.m
    if n_l < 1:
        issues.append("no leader variables")
    if n_f < 1:
        issues.append("no follower variables")
    if m < 1:
        issues.append("no interaction rows")
    if inst.p.shape != (n_f,):
        issues.append(f"p has shape {inst.p.shape}, expected ({n_f},)")
    if inst.A.ndim != 2 or inst.A.shape != (m, n_l):
        issues.append(f"A has shape {inst.A.shape}, expected ({m}, {n_l})")
    if inst.B.ndim != 2 or inst.B.shape != (m, n_f):
        issues.append(f"B has shape {inst.B.shape}, expected ({m}, {n_f})")
    m_L = inst.m_L
    if inst.Gx.shape != (m_L, n_l):
        issues.append(f"Gx has shape {inst.Gx.shape}, expected ({m_L}, {n_l})")
    if inst.Gy.shape != (m_L, n_f):
        issues.append(f"Gy has shape {inst.Gy.shape}, expected ({m_L}, {n_f})")
    for key in ("A", "B", "b"):
        if getattr(inst, key).dtype != np.int64:
            issues.append(f"{key} is not integral; apply scale_to_integer")
    for key in ("c", "p", "d", "Gx", "Gy", "h"):
        if not np.all(np.isfinite(getattr(inst, key))):
            issues.append(f"{key} has non-finite entries")
    if inst.A.dtype == np.int64 and inst.A.size:
        reach = np.abs(inst.A).sum(axis=1)
        if np.any(reach >= INT_LIMIT):
            issues.append("interaction states may overflow 64-bit arithmetic")
    return issues


def scale_to_integer(inst: BilevelInstance) -> BilevelInstance:
    """Scale every interaction row by the LCM of its denominators.

    Returns ``inst`` itself when the data is already integral.  The scaling
    factors multiply the recorded ``row_scale``.
    """
    if inst.is_integral:
        return inst
    rows_a, rows_b, rhs, factors = [], [], [], []
    for i in range(inst.m):
        row = [_as_fraction(v) for v in inst.A[i]] + [_as_fraction(v) for v in inst.B[i]]
        r = _as_fraction(inst.b[i])
        lcm = 1
        for f in row + [r]:
            lcm = math.lcm(lcm, f.denominator)
        scaled = [f * lcm for f in row]
        r_scaled = r * lcm
        if any(abs(v) >= INT_LIMIT for v in scaled + [r_scaled]):
            raise InstanceError(f"interaction row {i} overflows 64-bit integers after scaling by {lcm}")
        rows_a.append([int(v) for v in scaled[: inst.n_l]])
        rows_b.append([int(v) for v in scaled[inst.n_l :]])
        rhs.append(int(r_scaled))
        factors.append(lcm * (inst.row_scale[i] if i < len(inst.row_scale) else 1))
    return BilevelInstance.create(
        inst.c, inst.p, inst.d,
        np.array(rows_a, dtype=np.int64).reshape(inst.m, inst.n_l),
        np.array(rows_b, dtype=np.int64).reshape(inst.m, inst.n_f),
        rhs, inst.Gx, inst.Gy, inst.h,
        name=inst.name, row_scale=factors,
    )


@dataclass(frozen=True)
class InteractionStats:
    alpha: int
    tau: float
    subset_sums: tuple[int, ...]


def _count_subset_sums(row: Sequence[int], cap: int) -> int:
    sums = {0}
    for a in row:
        if a == 0:
            continue
        sums |= {s + int(a) for s in sums}
        if len(sums) > cap:
            return cap
    return len(sums)


def interaction_stats(inst: BilevelInstance, subset_cap: int = 1_000_000) -> InteractionStats:
    """Distinct nonzero values of A, its density, and per-row distinct subset-sum counts.

    Subset-sum counts are capped at ``subset_cap`` (the cap value is reported when hit).
    """
    A = np.asarray(inst.A)
    nonzero = A[A != 0]
    alpha = len({int(v) if A.dtype == np.int64 else v for v in nonzero.flat})
    size = A.size
    tau = float(len(nonzero)) / size if size else 0.0
    sums = tuple(_count_subset_sums(A[i].tolist(), subset_cap) for i in range(A.shape[0]))
    return InteractionStats(alpha=alpha, tau=tau, subset_sums=sums)

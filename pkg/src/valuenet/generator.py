"""Seeded random instances and the budget schedule.

Randomness comes from SplitMix64 so that a seed yields the same instance in
any language.  Integers in ``[lo, hi]`` are drawn by rejection: with
``r = hi - lo + 1`` and ``limit = 2^64 - (2^64 mod r)``, raw outputs ``v >=
limit`` are discarded and ``lo + v mod r`` is returned.

Draw order: ``A`` row-major (a draw in ``[0, 4]`` decides zero unless it is
0, then a magnitude ``5 k`` with ``k`` in ``[1, alpha]``), ``B`` row-major, ``Gx`` like ``A``, ``Gy`` like
``B``, then ``c``, ``p`` and ``d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .instance import BilevelInstance

_MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int) -> None:
        self.state = int(seed) & _MASK

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def integer(self, lo: int, hi: int) -> int:
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        r = hi - lo + 1
        limit = (1 << 64) - ((1 << 64) % r)
        while True:
            v = self.next()
            if v < limit:
                return lo + v % r


@dataclass(frozen=True)
class GeneratorConfig:
    """Instance shape and distribution knobs; ``m_L=None`` mirrors the interaction row count."""

    n_l: int
    m: int
    alpha: int = 1
    beta: float = 0.1
    seed: int = 0
    n_f: int = 10
    m_L: int | None = None

    def __post_init__(self) -> None:
        if self.n_l < 1 or self.n_f < 1 or self.m < 1:
            raise ValueError("n_l, n_f and m must be positive")
        if self.alpha < 1:
            raise ValueError("alpha must be at least 1")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie strictly between 0 and 1")
        if self.m_L is not None and self.m_L < 0:
            raise ValueError("m_L must be non-negative")

    @property
    def leader_rows(self) -> int:
        return self.m if self.m_L is None else self.m_L

    @property
    def name(self) -> str:
        return f"gen_{self.n_l}_{self.n_f}_{self.m}_{self.alpha}_{self.beta:g}_{self.seed}"


def _sparse_matrix(rng: SplitMix64, rows: int, cols: int, alpha: int) -> list[list[int]]:
    out = []
    for _ in range(rows):
        row = []
        for _ in range(cols):
            # nonzero with probability exactly 1/5
            row.append(5 * rng.integer(1, alpha) if rng.integer(0, 4) == 0 else 0)
        out.append(row)
    return out


def _dense_matrix(rng: SplitMix64, rows: int, cols: int, lo: int, hi: int) -> list[list[int]]:
    return [[rng.integer(lo, hi) for _ in range(cols)] for _ in range(rows)]


def _tight_rhs(beta: float, left: list[list[int]], right: list[list[int]]) -> list[int]:
    frac = Fraction(str(beta))
    return [math.floor(frac * (sum(a) + sum(b))) for a, b in zip(left, right)]


def generate_structured(cfg: GeneratorConfig) -> BilevelInstance:
    rng = SplitMix64(cfg.seed)
    A = _sparse_matrix(rng, cfg.m, cfg.n_l, cfg.alpha)
    B = _dense_matrix(rng, cfg.m, cfg.n_f, 0, 100)
    Gx = _sparse_matrix(rng, cfg.leader_rows, cfg.n_l, cfg.alpha)
    Gy = _dense_matrix(rng, cfg.leader_rows, cfg.n_f, 0, 100)
    c = [rng.integer(-100, -1) for _ in range(cfg.n_l)]
    p = [rng.integer(-100, -1) for _ in range(cfg.n_f)]
    d = [rng.integer(-50, 50) for _ in range(cfg.n_f)]
    b = _tight_rhs(cfg.beta, A, B)
    h = _tight_rhs(cfg.beta, Gx, Gy)
    return BilevelInstance.create(c=c, p=p, d=d, A=A, B=B, b=b, Gx=Gx or None, Gy=Gy or None, h=h,
                                  name=cfg.name)


def budget_schedule(n_l: int) -> int:
    """Node budget per layer by leader dimension."""
    if n_l < 1:
        raise ValueError("n_l must be positive")
    if n_l <= 150:
        return 50
    if n_l <= 300:
        return 25
    if n_l <= 500:
        return 16
    if n_l <= 1000:
        return 8
    return 4


__all__ = ["GeneratorConfig", "SplitMix64", "budget_schedule", "generate_structured"]

import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from valuenet import BilevelInstance
from valuenet.generator import GeneratorConfig, generate_structured

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def mixed_instance(seed, n_l=None, n_f=None, m=None, m_L=None):
    """Small instance with signed data, so follower feasibility really depends on x."""
    r = np.random.default_rng(seed)
    n_l = int(r.integers(3, 9)) if n_l is None else n_l
    n_f = int(r.integers(2, 6)) if n_f is None else n_f
    m = int(r.integers(1, 4)) if m is None else m
    m_L = int(r.integers(0, 3)) if m_L is None else m_L
    return BilevelInstance.create(
        c=r.integers(-10, 10, n_l), p=r.integers(-10, 10, n_f), d=r.integers(-10, 10, n_f),
        A=r.integers(-5, 6, (m, n_l)), B=r.integers(-5, 6, (m, n_f)), b=r.integers(-8, 3, m),
        Gx=r.integers(-3, 4, (m_L, n_l)) if m_L else None,
        Gy=r.integers(-3, 4, (m_L, n_f)) if m_L else None,
        h=r.integers(-4, 1, m_L) if m_L else None,
        name=f"mixed_{seed}",
    )


def scaled_generator_instance(seed):
    """Generator distributions at oracle scale: n_l <= 12, n_f <= 8, m <= 3."""
    cfg = GeneratorConfig(n_l=6 + seed % 7, m=1 + seed % 3, alpha=1 + seed % 3, beta=(0.1, 0.3, 0.5)[seed % 3],
                          seed=seed, n_f=3 + seed % 6)
    return generate_structured(cfg)


def all_binary(n):
    return [tuple(v) for v in itertools.product((0, 1), repeat=n)]


@st.composite
def instances(draw, max_l=6, max_f=4, max_m=3, max_mL=2):
    n_l = draw(st.integers(1, max_l))
    n_f = draw(st.integers(1, max_f))
    m = draw(st.integers(1, max_m))
    m_L = draw(st.integers(0, max_mL))
    small = st.integers(-5, 5)
    mat = lambda r, c: [[draw(small) for _ in range(c)] for _ in range(r)]
    return BilevelInstance.create(
        c=[draw(st.integers(-9, 9)) for _ in range(n_l)],
        p=[draw(st.integers(-9, 9)) for _ in range(n_f)],
        d=[draw(st.integers(-9, 9)) for _ in range(n_f)],
        A=mat(m, n_l), B=mat(m, n_f), b=[draw(st.integers(-8, 2)) for _ in range(m)],
        Gx=mat(m_L, n_l) if m_L else None, Gy=mat(m_L, n_f) if m_L else None,
        h=[draw(st.integers(-4, 0)) for _ in range(m_L)] if m_L else None,
    )


@pytest.fixture
def tmp_json(tmp_path):
    return tmp_path / "inst.json"


def pytest_terminal_summary(terminalreporter):
    results = getattr(__import__("sys").modules.get("test_acceptance"), "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        ok, detail = results[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")

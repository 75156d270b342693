"""Small hand-built instances used by the tests, the CLI and the README."""

from __future__ import annotations

from .instance import BilevelInstance


def indicator_gap_instance() -> BilevelInstance:
    """Three reachable states whose follower values are 0, -100 and -1.

    The leader rows force ``x = (0, 1)``.  The state ``-5 (x1 + x2)`` is
    encoded in two mirrored rows so that the middle state can be the only
    one admitting the expensive response.  The optimum is 100, while the
    state-indicator LP relaxation only reaches 0.5.
    """
    return BilevelInstance.create(
        c=[1, 0],
        p=[100, 1],
        d=[-100, -1],
        A=[[-5, -5], [5, 5]],
        B=[[-5, 0], [-5, -10]],
        b=[-10, 0],
        Gx=[[1, 1], [-1, -1], [0, 1]],
        Gy=[[0, 0], [0, 0], [0, 0]],
        h=[1, -1, 1],
        name="indicator_gap",
    )


def reduction_instance() -> BilevelInstance:
    """Three leader and two follower variables with twelve reachable states and eight reduced nodes."""
    return BilevelInstance.create(
        c=[-1, -2, -3],
        p=[-1, -1],
        d=[-5, 3],
        A=[[-1, -1, -1], [0, 0, -2]],
        B=[[-3, -1], [-4, 2]],
        b=[-5, -4],
        name="reduction",
    )


def merge_instance() -> BilevelInstance:
    """Two interaction rows with distinct column patterns, used to illustrate box merging."""
    return BilevelInstance.create(
        c=[-1, -1, -1],
        p=[-1, -1],
        d=[-100, -100],
        A=[[-1, -2, -3], [-3, -2, -1]],
        B=[[-6, 0], [0, -7]],
        b=[-10, -10],
        name="merge",
    )


CATALOG = {
    "indicator_gap": indicator_gap_instance,
    "reduction": reduction_instance,
    "merge": merge_instance,
}

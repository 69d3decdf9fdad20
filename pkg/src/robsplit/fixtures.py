"""Small built-in problems used by the tests and ``robsplit verify``."""

from __future__ import annotations

import numpy as np

from .model import AffineParam, AROProblem, Constraint, Polyhedron
from .routeplan import GraphInstance, build_rpp

# Two quadrilaterals in the (y1, y2) plane, one per realization of z.
QUAD_AT_0 = ((1.25, 5.75), (1.25, 1.5), (2.0, 0.75), (6.0, 5.75))
QUAD_AT_1 = ((1.0, 5.5), (0.5, 1.0), (6.0, 3.0), (4.0, 5.0))
_LOOSEN = 20.0


def _inward_edges(vertices):
    V = np.asarray(vertices, dtype=float)
    center = V.mean(axis=0)
    out = []
    for k in range(len(V)):
        a, b = V[k], V[(k + 1) % len(V)]
        n = np.array([a[1] - b[1], b[0] - a[0]])
        if n @ (center - a) < 0:
            n = -n
        off = float(n @ a)
        out.append((n / abs(off), float(np.sign(off))))
    return out


def deterministic_toy() -> AROProblem:
    """``min y1 + 2 y2`` with ``y1 + y2 >= 1.5``, ``y2 >= 0.5``, ``y`` integer; no
    dependence on ``z``. Optimum 3 at ``y = (1, 1)``."""
    L = 1
    zero = AffineParam.constant([], L)
    cons = [Constraint(zero, AffineParam.constant([1.0, 1.0], L), 1.5),
            Constraint(zero, AffineParam.constant([0.0, 1.0], L), 0.5)]
    return AROProblem(zero, AffineParam.constant([1.0, 2.0], L), cons,
                      Polyhedron.box([0.0], [1.0]), 0, 2, name="deterministic-toy")


def interval_toy() -> AROProblem:
    """``min t`` with ``t >= z y`` for all ``z`` in ``[0, 1]`` and ``y >= 1``."""
    L = 1
    zero = AffineParam.constant([], L)
    cost_y = AffineParam(np.zeros(1), np.ones((1, 1)))
    cons = [Constraint(zero, AffineParam.constant([1.0], L), 1.0)]
    return AROProblem(zero, cost_y, cons, Polyhedron.box([0.0], [1.0]), name="interval-toy")


def two_quadrilaterals() -> AROProblem:
    """Integer ``(y1, y2)`` minimizing ``2 y1 + y2`` inside both quadrilaterals.

    Each edge row of one quadrilateral is relaxed by ``20 z (y1 + y2)`` (or
    ``20 (1 - z) (y1 + y2)``), so only ``z = 0`` enforces the first shape and only
    ``z = 1`` the second. The LP relaxation stops at ``(1.25, 1.5)`` where just the
    ``z = 0`` rows bind, the integer optimum is ``(2, 2)``, and separating the two
    realizations allows ``(2, 1)`` and ``(1, 2)``.
    """
    L = 1
    zero = AffineParam.constant([], L)
    ones = np.ones((2, 1))
    cons = []
    for n, sign in _inward_edges(QUAD_AT_0):
        cons.append(Constraint(zero, AffineParam(n, _LOOSEN * ones), sign))
    for n, sign in _inward_edges(QUAD_AT_1):
        cons.append(Constraint(zero, AffineParam(n + _LOOSEN, -_LOOSEN * ones), sign))
    return AROProblem(zero, AffineParam.constant([2.0, 1.0], L), cons,
                      Polyhedron.box([0.0], [1.0]), 0, 2, name="two-quadrilaterals")


def tied_routes_instance() -> GraphInstance:
    """Two disjoint two-arc routes ``0-1-3`` and ``0-2-3`` with unit lengths."""
    coords = [(0.0, 0.0), (1.0, 1.0), (1.0, -1.0), (2.0, 0.0)]
    arcs = [(0, 1), (1, 3), (0, 2), (2, 3)]
    return GraphInstance.from_arcs(coords, arcs, 0, 3, lengths=[1.0] * 4)


def tied_routes() -> AROProblem:
    """Worst-case shortest path on :func:`tied_routes_instance` with budget 2.

    Objective uncertainty only. The LP relaxation splits the flow evenly (value
    2.5, one worst case); every integer route costs 3, and splitting between the
    two fully inflated routes brings the static value back to 2.5.
    """
    return build_rpp(tied_routes_instance(), 2)


FIXTURES = {
    "deterministic-toy": deterministic_toy,
    "interval-toy": interval_toy,
    "two-quadrilaterals": two_quadrilaterals,
    "tied-routes": tied_routes,
}

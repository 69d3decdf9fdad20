"""Problem data for two-stage adjustable robust problems and the partition tree
of the uncertainty set.

Every uncertain coefficient vector is affine in ``z``: ``v(z) = nominal +
perturbation @ z``. The uncertainty set and all of its cells are polyhedra
``{z : P z <= p}``. A partition is a binary tree of halfspace cuts; a leaf's
region is the base set plus one row per ancestor cut.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .lp import TOL_FEAS, Infeasible, Optimal, StandardFormLP, solve_lp


class AssumptionError(ValueError):
    """The problem data violates a standing assumption of the method."""

    def __init__(self, assumption: str, message: str):
        super().__init__(f"[{assumption}] {message}")
        self.assumption = assumption


class DegenerateSplitError(ValueError):
    """A cut leaves one side of the cell empty."""


class DomainError(ValueError):
    """A scenario lies outside the uncertainty set."""


@dataclass(frozen=True)
class AffineParam:
    nominal: np.ndarray
    perturbation: np.ndarray

    @classmethod
    def constant(cls, nominal, L: int) -> "AffineParam":
        nominal = np.asarray(nominal, dtype=float).reshape(-1)
        return cls(nominal, np.zeros((nominal.size, L)))

    @property
    def dim(self) -> int:
        return self.nominal.size

    @property
    def uncertain(self) -> bool:
        return bool(np.any(self.perturbation != 0))

    def at(self, z) -> np.ndarray:
        return self.nominal + self.perturbation @ np.asarray(z, dtype=float)


@dataclass(frozen=True)
class Constraint:
    """``a(z) @ x + w(z) @ y >= b`` for every ``z`` of a cell."""

    a: AffineParam
    w: AffineParam
    b: float

    @property
    def uncertain(self) -> bool:
        return self.a.uncertain or self.w.uncertain


@dataclass(frozen=True)
class Polyhedron:
    P: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        if self.P.ndim != 2 or self.P.shape[0] != len(self.p):
            raise ValueError(f"polyhedron rows disagree: P {self.P.shape}, p {len(self.p)}")

    @classmethod
    def box(cls, lower, upper) -> "Polyhedron":
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        L = lower.size
        return cls(np.vstack([np.eye(L), -np.eye(L)]), np.concatenate([upper, -lower]))

    @property
    def dim(self) -> int:
        return self.P.shape[1]

    def contains(self, z, tol: float = TOL_FEAS) -> bool:
        z = np.asarray(z, dtype=float)
        return bool(np.all(self.P @ z <= self.p + tol * (1.0 + np.abs(self.p))))

    def with_row(self, normal, offset: float) -> "Polyhedron":
        return Polyhedron(np.vstack([self.P, np.asarray(normal, dtype=float)]),
                          np.append(self.p, float(offset)))

    def maximize(self, g, backend: str = "simplex"):
        """Return ``(max g @ z, argmax)`` over the polyhedron; ``(-inf, None)`` if
        empty and ``(inf, None)`` if unbounded in direction ``g``."""
        g = np.asarray(g, dtype=float)
        lp = StandardFormLP.build(-g, -self.P, -self.p, nonneg=np.zeros(self.dim, dtype=bool))
        out = solve_lp(lp, backend)
        if isinstance(out, Optimal):
            return -out.objective, out.primal
        if isinstance(out, Infeasible):
            return -np.inf, None
        return np.inf, None

    def is_empty(self, backend: str = "simplex") -> bool:
        return self.maximize(np.zeros(self.dim), backend)[1] is None


@dataclass(frozen=True)
class AROProblem:
    """``min t`` subject to, for all ``z`` in the base set,

    ``t >= c(z) @ x + q(z) @ y(z)`` and ``a_i(z) @ x + w_i(z) @ y(z) >= b_i``,

    with ``x, y >= 0`` and the leading ``m1`` / ``m2`` components integer.
    """

    cost_x: AffineParam
    cost_y: AffineParam
    constraints: tuple
    base_set: Polyhedron
    m1: int = 0
    m2: int = 0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        L = self.L
        if self.cost_y.perturbation.shape != (self.d2, L) or self.cost_x.perturbation.shape != (self.d1, L):
            raise ValueError("cost perturbation matrices must be (d, L)")
        for k, con in enumerate(self.constraints):
            if con.a.dim != self.d1 or con.w.dim != self.d2:
                raise ValueError(f"constraint {k}: coefficient lengths do not match d1/d2")
            if con.a.perturbation.shape[1] != L or con.w.perturbation.shape[1] != L:
                raise ValueError(f"constraint {k}: perturbation column count differs from L")
        if not (0 <= self.m1 <= self.d1 and 0 <= self.m2 <= self.d2):
            raise ValueError("integer counts must satisfy 0 <= m1 <= d1 and 0 <= m2 <= d2")

    @property
    def L(self) -> int:
        return self.base_set.dim

    @property
    def d1(self) -> int:
        return self.cost_x.dim

    @property
    def d2(self) -> int:
        return self.cost_y.dim

    @property
    def uncertain_objective(self) -> bool:
        return self.cost_x.uncertain or self.cost_y.uncertain

    @property
    def objective_only(self) -> bool:
        return not any(con.uncertain for con in self.constraints)

    def uncertain_constraints(self) -> list[int]:
        """1-based indices of constraints that depend on ``z`` (0 is the objective)."""
        return [k + 1 for k, con in enumerate(self.constraints) if con.uncertain]

    def objective_at(self, z, x, y) -> float:
        return float(self.cost_x.at(z) @ x + self.cost_y.at(z) @ y)

    def worst_case(self, region: Polyhedron, x, y, backend: str = "simplex"):
        """Worst-case objective of a fixed ``(x, y)`` over ``region`` and its maximizer."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        const = self.cost_x.nominal @ x + self.cost_y.nominal @ y
        g = self.cost_x.perturbation.T @ x + self.cost_y.perturbation.T @ y
        val, z = region.maximize(g, backend)
        return const + val, z


@dataclass(frozen=True)
class ValidationReport:
    bounds: np.ndarray  # (L, 2) componentwise range of the base set
    objective_only: bool


def validate(problem: AROProblem, backend: str = "simplex") -> ValidationReport:
    Z = problem.base_set
    if Z.is_empty(backend):
        raise AssumptionError("nonempty-bounded-set", "the uncertainty set is empty")
    bounds = np.zeros((problem.L, 2))
    for k in range(problem.L):
        e = np.zeros(problem.L)
        e[k] = 1.0
        hi, _ = Z.maximize(e, backend)
        lo, _ = Z.maximize(-e, backend)
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise AssumptionError("nonempty-bounded-set",
                                  f"the uncertainty set is unbounded along z[{k}]")
        bounds[k] = (-lo, hi)
    return ValidationReport(bounds=bounds, objective_only=problem.objective_only)


# --------------------------------------------------------------------------
# partition tree

@dataclass(frozen=True)
class Cell:
    id: str
    parent: Optional[str] = None
    # this cell keeps normal @ z <= offset (normal already oriented)
    cut: Optional[tuple] = None
    generation: int = 0


@dataclass(frozen=True)
class Partition:
    base: Polyhedron
    cells: tuple = field(default_factory=tuple)

    ROOT = "r"

    @classmethod
    def single(cls, base: Polyhedron) -> "Partition":
        return cls(base, (Cell(cls.ROOT),))

    def cell(self, cell_id: str) -> Cell:
        for c in self.cells:
            if c.id == cell_id:
                return c
        raise KeyError(cell_id)

    def children(self, cell_id: str) -> list[str]:
        return sorted(c.id for c in self.cells if c.parent == cell_id)

    def leaves(self) -> list[str]:
        parents = {c.parent for c in self.cells}
        return sorted(c.id for c in self.cells if c.id not in parents)

    def __len__(self) -> int:
        return len(self.leaves())

    def ancestry(self, cell_id: str) -> list[Cell]:
        chain = []
        c = self.cell(cell_id)
        while c.parent is not None:
            chain.append(c)
            c = self.cell(c.parent)
        return chain[::-1]

    def region(self, cell_id: str) -> Polyhedron:
        cuts = [c.cut for c in self.ancestry(cell_id)]
        if not cuts:
            return self.base
        P = np.vstack([self.base.P] + [np.asarray(n, dtype=float).reshape(1, -1) for n, _ in cuts])
        p = np.concatenate([self.base.p, [o for _, o in cuts]])
        return Polyhedron(P, p)

    def regions(self) -> dict:
        return {s: self.region(s) for s in self.leaves()}


def refine(partition: Partition, cell_id: str, normal, offset: float,
           generation: int = 0, backend: str = "simplex") -> Partition:
    """Split a leaf by the plane ``normal @ z = offset``.

    Child ``id + "0"`` keeps ``normal @ z <= offset`` and child ``id + "1"`` the
    opposite side. Raises ``DegenerateSplitError`` unless both sides have points
    strictly off the plane.
    """
    if cell_id not in partition.leaves():
        raise KeyError(f"{cell_id} is not a leaf")
    normal = np.asarray(normal, dtype=float)
    offset = float(offset)
    region = partition.region(cell_id)
    hi, _ = region.maximize(normal, backend)
    lo, _ = region.maximize(-normal, backend)
    lo = -lo
    margin = TOL_FEAS * (1.0 + abs(offset))
    if not (lo < offset - margin and hi > offset + margin):
        raise DegenerateSplitError(
            f"plane leaves one side of cell {cell_id} empty (range [{lo:.6g}, {hi:.6g}], offset {offset:.6g})")
    below = Cell(cell_id + "0", cell_id, (tuple(normal), offset), generation)
    above = Cell(cell_id + "1", cell_id, (tuple(-normal), -offset), generation)
    return Partition(partition.base, partition.cells + (below, above))


def locate(partition: Partition, z, tol: float = TOL_FEAS) -> str:
    """Leaf containing ``z``; on shared boundaries the smallest id wins."""
    z = np.asarray(z, dtype=float)
    if not partition.base.contains(z, tol):
        raise DomainError("scenario lies outside the uncertainty set")
    node = Partition.ROOT
    while True:
        kids = partition.children(node)
        if not kids:
            return node
        for kid in kids:
            normal, offset = partition.cell(kid).cut
            if np.dot(normal, z) <= offset + tol * (1.0 + abs(offset)):
                node = kid
                break
        else:  # pragma: no cover - the two cuts cover the parent
            raise DomainError("scenario not covered by any child")


# --------------------------------------------------------------------------
# file format

def _param_to_json(v: AffineParam) -> dict:
    out = {"nominal": v.nominal.tolist()}
    if v.uncertain:
        out["perturbation"] = v.perturbation.tolist()
    return out


def _param_from_json(d: dict, L: int) -> AffineParam:
    nominal = np.asarray(d["nominal"], dtype=float).reshape(-1)
    if "perturbation" in d:
        pert = np.asarray(d["perturbation"], dtype=float).reshape(nominal.size, L)
    else:
        pert = np.zeros((nominal.size, L))
    return AffineParam(nominal, pert)


def problem_to_dict(problem: AROProblem) -> dict:
    return {
        "name": problem.name,
        "L": problem.L, "d1": problem.d1, "d2": problem.d2,
        "m1": problem.m1, "m2": problem.m2,
        "cost_x": _param_to_json(problem.cost_x),
        "cost_y": _param_to_json(problem.cost_y),
        "constraints": [
            {"a": _param_to_json(c.a), "w": _param_to_json(c.w), "b": c.b}
            for c in problem.constraints
        ],
        "base_set": {"P": problem.base_set.P.tolist(), "p": problem.base_set.p.tolist()},
    }


def problem_from_dict(d: dict) -> AROProblem:
    try:
        L = int(d["L"])
        d1, d2 = int(d.get("d1", 0)), int(d["d2"])
        base = Polyhedron(np.asarray(d["base_set"]["P"], dtype=float).reshape(-1, L),
                          np.asarray(d["base_set"]["p"], dtype=float).reshape(-1))
        cost_x = _param_from_json(d.get("cost_x", {"nominal": [0.0] * d1}), L)
        cost_y = _param_from_json(d["cost_y"], L)
        cons = [Constraint(_param_from_json(c.get("a", {"nominal": [0.0] * d1}), L),
                           _param_from_json(c.get("w", {"nominal": [0.0] * d2}), L),
                           float(c["b"]))
                for c in d.get("constraints", [])]
        problem = AROProblem(cost_x, cost_y, cons, base, int(d.get("m1", 0)),
                             int(d.get("m2", 0)), d.get("name", ""))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed problem document: missing or invalid field {exc}") from exc
    if problem.d1 != d1 or problem.d2 != d2:
        raise ValueError("declared d1/d2 disagree with cost vector lengths")
    return problem


def load_problem(path) -> AROProblem:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    return problem_from_dict(doc)


def save_problem(problem: AROProblem, path) -> None:
    with open(path, "w") as fh:
        json.dump(problem_to_dict(problem), fh, indent=1)

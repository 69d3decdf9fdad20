"""Adaptive partitioning of the uncertainty set.

Each round solves the static problem on the current partition by
branch-and-bound, collects the critical scenarios ``u / lambda`` of the nodes in
a minimum critical cutset, and splits every cell whose worst case attains the
optimum with the bisecting plane of its two farthest scenarios. When no cell
holds two distinct scenarios the static optimum is also optimal for the
adjustable problem and the loop stops.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .bnb import BnBResult, min_critical_cutset, solve_bnb
from .counterpart import LAMBDA_THRESHOLD
from .lp import Optimal, StandardFormLP, solve_lp
from .model import AROProblem, DegenerateSplitError, Partition, refine, validate

log = logging.getLogger(__name__)

TOL_ACTIVE = 1e-6
DEDUP_TOL = 1e-7


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class CriticalScenario:
    z: np.ndarray
    node: str
    constraint: int


class CriticalScenarioSet(dict):
    """Mapping ``cell id -> list[CriticalScenario]`` with deduplication."""

    def add(self, cell: str, scenario: CriticalScenario, tol: float = DEDUP_TOL) -> bool:
        bucket = self.setdefault(cell, [])
        for other in bucket:
            if np.max(np.abs(other.z - scenario.z), initial=0.0) <= tol:
                return False
        bucket.append(scenario)
        return True

    def points(self, cell: str) -> list:
        return [sc.z for sc in self.get(cell, [])]

    def counts(self) -> dict:
        return {s: len(v) for s, v in sorted(self.items())}


def harvest_critical_scenarios(result: BnBResult, cutset, partition: Partition,
                               threshold: float = LAMBDA_THRESHOLD,
                               dedup_tol: float = DEDUP_TOL) -> CriticalScenarioSet:
    nodes = result.nodes
    found = CriticalScenarioSet({s: [] for s in partition.leaves()})
    for nid in cutset:
        duals = nodes[nid].duals
        for s in partition.leaves():
            for i, z in duals.scenarios(s, threshold):
                found.add(s, CriticalScenario(z, nid, i), dedup_tol)
    return found


def bisecant_plane(z, z2, tol: float = DEDUP_TOL):
    """Plane through the midpoint of ``z`` and ``z2`` with normal ``z - z2``."""
    z = np.asarray(z, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    normal = z - z2
    if np.linalg.norm(normal) <= tol:
        raise DegenerateSplitError("bisecant of coincident scenarios")
    return normal, float(normal @ (z + z2) / 2.0)


def active_cells(problem: AROProblem, partition: Partition, result: BnBResult,
                 tol: float = TOL_ACTIVE, backend: str = "simplex") -> list:
    """Cells whose worst case under the incumbent attains the optimum."""
    t_bar = result.incumbent_objective
    out = []
    for s in partition.leaves():
        val, _ = problem.worst_case(partition.region(s), result.x, result.y[s], backend)
        if val >= t_bar - tol * max(1.0, abs(t_bar)):
            out.append(s)
    return out


def _farthest_pairs(points):
    order = sorted(range(len(points)), key=lambda k: tuple(points[k]))
    pts = [points[k] for k in order]
    pairs = []
    for a in range(len(pts)):
        for b in range(a + 1, len(pts)):
            pairs.append((-round(float(np.linalg.norm(pts[a] - pts[b])), 12), a, b))
    pairs.sort()
    return [(pts[a], pts[b]) for _, a, b in pairs]


def split_round(problem: AROProblem, partition: Partition, result: BnBResult,
                scenarios: CriticalScenarioSet, generation: int = 0,
                max_cells: Optional[int] = None, tol_active: float = TOL_ACTIVE,
                backend: str = "simplex"):
    """Split each active cell holding two or more scenarios; return the new
    partition and a list of action records."""
    actions = []
    new = partition
    active = set(active_cells(problem, partition, result, tol_active, backend))
    for s in partition.leaves():
        if s not in active:
            continue
        pts = scenarios.points(s)
        if len(pts) < 2:
            actions.append({"cell": s, "action": "keep", "scenarios": len(pts)})
            continue
        if max_cells is not None and len(new) >= max_cells:
            actions.append({"cell": s, "action": "cap"})
            continue
        for za, zb in _farthest_pairs(pts):
            normal, offset = bisecant_plane(za, zb)
            try:
                new = refine(new, s, normal, offset, generation, backend)
            except DegenerateSplitError:
                actions.append({"cell": s, "action": "degenerate",
                                "pair": [za.tolist(), zb.tolist()]})
                log.info("degenerate bisecant in cell %s, trying next pair", s)
                continue
            actions.append({"cell": s, "action": "split", "pair": [za.tolist(), zb.tolist()],
                            "normal": normal.tolist(), "offset": offset})
            break
    return new, actions


def check_stop(scenarios: CriticalScenarioSet) -> bool:
    return all(len(v) <= 1 for v in scenarios.values())


def ex_post_correction(problem: AROProblem, x, ys: dict, backend: str = "simplex",
                       check: bool = True) -> float:
    """``max_z min_s`` objective over the base set with the per-cell decisions fixed.

    Only sound when the constraints do not depend on ``z``.
    """
    if check and not problem.objective_only:
        raise PreconditionError("ex-post correction needs z-free constraints")
    x = np.asarray(x, dtype=float)
    L = problem.L
    Z = problem.base_set
    # variables (tau, z), both free; maximize tau
    rows, rhs = [], []
    for s in sorted(ys):
        y = np.asarray(ys[s], dtype=float)
        const = problem.cost_x.nominal @ x + problem.cost_y.nominal @ y
        g = problem.cost_x.perturbation.T @ x + problem.cost_y.perturbation.T @ y
        rows.append(np.concatenate([[-1.0], g]))
        rhs.append(-const)
    for k in range(Z.P.shape[0]):
        rows.append(np.concatenate([[0.0], -Z.P[k]]))
        rhs.append(-Z.p[k])
    c = np.zeros(L + 1)
    c[0] = -1.0
    lp = StandardFormLP.build(c, rows, rhs, nonneg=np.zeros(L + 1, dtype=bool))
    out = solve_lp(lp, backend)
    if not isinstance(out, Optimal):
        raise RuntimeError(f"ex-post LP ended {out.status}")
    return -out.objective


@dataclass
class RoundRecord:
    r: int
    n_cells: int
    t_bar: float
    t_under: Optional[float]
    counts: dict
    actions: list
    partition: Partition = field(repr=False)
    x: np.ndarray = field(repr=False, default=None)
    y: dict = field(repr=False, default=None)
    stop: bool = False

    def to_json(self) -> str:
        cuts = [{"cell": c.id, "normal": list(c.cut[0]), "offset": c.cut[1]}
                for c in self.partition.cells if c.cut is not None and c.id.endswith("0")]
        return json.dumps({
            "r": self.r, "cells": self.n_cells, "t_bar": self.t_bar,
            "t_under": self.t_under, "scenario_counts": self.counts,
            "actions": self.actions, "stop": self.stop, "cuts": cuts,
        })


class RoundTrace(list):
    def value_at(self, n_cells: int, attr: str = "t_bar") -> float:
        """Value in effect once the partition has at most ``n_cells`` cells."""
        chosen = None
        for rec in self:
            if rec.n_cells <= n_cells:
                chosen = rec
        return getattr(chosen, attr)

    def dumps(self) -> str:
        return "".join(rec.to_json() + "\n" for rec in self)


Detector = Callable[[AROProblem, Partition, BnBResult], CriticalScenarioSet]


def bnb_detector(problem, partition, result, threshold=LAMBDA_THRESHOLD, dedup_tol=DEDUP_TOL):
    cutset = min_critical_cutset(result)
    return harvest_critical_scenarios(result, cutset, partition, threshold, dedup_tol)


def run(problem: AROProblem, max_cells: int = 10, max_rounds: int = 50,
        detector: Optional[Detector] = None, backend: str = "simplex",
        postprocess: Optional[Callable] = None, tol_active: float = TOL_ACTIVE,
        threshold: float = LAMBDA_THRESHOLD, dedup_tol: float = DEDUP_TOL) -> RoundTrace:
    """Alternate solving and splitting until the stop rule, ``max_cells`` or
    ``max_rounds``.

    ``detector`` replaces the cutset-based scenario detection (used by the
    route-planning baselines); with a custom detector the stop rule is not a
    certificate and the loop ends only when nothing gets split.
    """
    report = validate(problem, backend)
    certified = detector is None
    if detector is None:
        def detector(problem, partition, result):
            return bnb_detector(problem, partition, result, threshold, dedup_tol)
    partition = Partition.single(problem.base_set)
    trace = RoundTrace()
    for r in range(max_rounds + 1):
        result = solve_bnb(problem, partition, backend)
        scen = detector(problem, partition, result)
        x, ys = result.x, result.y
        if postprocess is not None:
            x, ys = postprocess(x, ys)
        t_under = ex_post_correction(problem, x, ys, backend) if report.objective_only else None
        stop = certified and check_stop(scen)
        rec = RoundRecord(r, len(partition), result.incumbent_objective, t_under,
                          scen.counts(), [], partition, x, ys, stop)
        trace.append(rec)
        if stop or len(partition) >= max_cells or r == max_rounds:
            break
        partition, actions = split_round(problem, partition, result, scen, r + 1,
                                         max_cells, tol_active, backend)
        rec.actions = actions
        if len(partition) == rec.n_cells:
            break
    return trace

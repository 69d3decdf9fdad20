"""Worst-case shortest path benchmark.

Random instances place ``N`` nodes uniformly in ``[0, 10]^2``, take the two
farthest nodes as start and end, and keep the shortest 30% of the arcs of the
complete digraph. Arc weights are ``(1 + z_a / 2) d_a`` with ``z`` in the budget
set ``{z in [0, 1]^A : sum(z) <= B}``.

Two ways of choosing the scenarios that drive each split are compared: the
cutset detection of :mod:`robsplit.splitter` and an overlap heuristic that pairs
the LP worst case ``z_LP`` with the worst case of the best route sharing at most
a fraction ``theta`` of the arcs of the shortest path under ``z_LP``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import networkx as nx
import numpy as np

from .bnb import solve_bnb
from .counterpart import LAMBDA_THRESHOLD
from .model import (AffineParam, AROProblem, AssumptionError, Constraint, Partition,
                    Polyhedron)
from .rng import SplitMix64, sub_seed
from .splitter import (CriticalScenario, CriticalScenarioSet, active_cells, run)

KEEP_FRACTION = 0.3


class InstanceError(RuntimeError):
    pass


@dataclass(frozen=True)
class GraphInstance:
    N: int
    coords: np.ndarray
    arcs: tuple
    d: np.ndarray
    b: int
    e: int
    seed: int = 0

    @classmethod
    def from_arcs(cls, coords, arcs, b: int, e: int, lengths=None) -> "GraphInstance":
        coords = np.asarray(coords, dtype=float)
        arcs = tuple((int(i), int(j)) for i, j in arcs)
        if lengths is None:
            lengths = [float(np.linalg.norm(coords[i] - coords[j])) for i, j in arcs]
        return cls(len(coords), coords, arcs, np.asarray(lengths, dtype=float), b, e)

    def graph(self, weights=None) -> nx.DiGraph:
        G = nx.DiGraph()
        G.add_nodes_from(range(self.N))
        w = self.d if weights is None else weights
        for k, (i, j) in enumerate(self.arcs):
            G.add_edge(i, j, weight=float(w[k]), index=k)
        return G

    def weights(self, z) -> np.ndarray:
        return (1.0 + np.asarray(z, dtype=float) / 2.0) * self.d


def generate_instance(N: int, seed: int, max_retries: int = 100) -> GraphInstance:
    """Random instance; redraws with the next sub-seed when ``e`` is unreachable."""
    if N < 4:
        raise ValueError("need at least 4 nodes")
    for attempt in range(max_retries):
        rng = SplitMix64(sub_seed(seed, attempt))
        coords = np.array([[rng.uniform(0, 10), rng.uniform(0, 10)] for _ in range(N)])
        complete = [(i, j) for i in range(N) for j in range(N) if i != j]
        dist = np.array([np.linalg.norm(coords[i] - coords[j]) for i, j in complete])
        n_keep = int(math.floor(KEEP_FRACTION * len(complete) + 0.5))
        order = sorted(range(len(complete)), key=lambda k: (dist[k], k))[:n_keep]
        order.sort()
        arcs = tuple(complete[k] for k in order)
        pairs = [(i, j) for i in range(N) for j in range(i + 1, N)]
        b, e = max(pairs, key=lambda ij: (np.linalg.norm(coords[ij[0]] - coords[ij[1]]), -ij[0], -ij[1]))
        inst = GraphInstance(N, coords, arcs, dist[order], b, e, seed)
        if nx.has_path(inst.graph(), b, e):
            return inst
    raise InstanceError(f"no start-end path after {max_retries} draws (N={N}, seed={seed})")


def budget_set(L: int, B: float) -> Polyhedron:
    P = np.vstack([np.eye(L), -np.eye(L), np.ones((1, L))])
    p = np.concatenate([np.ones(L), np.zeros(L), [float(B)]])
    return Polyhedron(P, p)


def build_rpp(inst: GraphInstance, B: float, extra=(), base_set: Optional[Polyhedron] = None) -> AROProblem:
    """Adjustable worst-case shortest path. ``extra`` holds additional z-free
    rows ``(coefficients over arcs, rhs)`` meaning ``coef @ y >= rhs``."""
    A = len(inst.arcs)
    Z = budget_set(A, B) if base_set is None else base_set
    cost_y = AffineParam(inst.d.copy(), np.diag(inst.d / 2.0))
    cost_x = AffineParam.constant([], A)
    cons = []
    for j in range(inst.N):
        w = np.zeros(A)
        for k, (u, v) in enumerate(inst.arcs):
            if u == j:
                w[k] += 1.0
            if v == j:
                w[k] -= 1.0
        rhs = float(j == inst.b) - float(j == inst.e)
        cons.append(Constraint(AffineParam.constant([], A), AffineParam.constant(w, A), rhs))
    for k in range(A):
        w = np.zeros(A)
        w[k] = -1.0
        cons.append(Constraint(AffineParam.constant([], A), AffineParam.constant(w, A), -1.0))
    for coef, rhs in extra:
        cons.append(Constraint(AffineParam.constant([], A),
                               AffineParam.constant(np.asarray(coef, dtype=float), A), float(rhs)))
    return AROProblem(cost_x, cost_y, cons, Z, 0, A, name=f"rpp-N{inst.N}-B{B}")


def route_arcs(inst: GraphInstance, y) -> list:
    """Arc indices of the shortest start-end path inside the 0/1 flow ``y``;
    cycles off that path are dropped."""
    G = nx.DiGraph()
    for k, (i, j) in enumerate(inst.arcs):
        if y[k] > 0.5:
            G.add_edge(i, j, weight=float(inst.d[k]), index=k)
    try:
        nodes = nx.dijkstra_path(G, inst.b, inst.e, weight="weight")
    except (nx.NetworkXNoPath, nx.NodeNotFound):
        raise ValueError("flow does not contain a start-end path") from None
    return [G.edges[u, v]["index"] for u, v in zip(nodes[:-1], nodes[1:])]


def clean_route(inst: GraphInstance, y) -> np.ndarray:
    out = np.zeros(len(inst.arcs))
    out[route_arcs(inst, y)] = 1.0
    return out


def route_worst_case(inst: GraphInstance, arcs_on_route, B: float) -> float:
    """Closed form: inflate the ``floor(B)`` longest arcs fully and the next one
    by the fractional remainder."""
    lengths = sorted((inst.d[k] for k in arcs_on_route), reverse=True)
    total = sum(lengths)
    budget = float(B)
    for ell in lengths:
        take = min(1.0, budget)
        if take <= 0:
            break
        total += take * ell / 2.0
        budget -= take
    return total


def shortest_route(inst: GraphInstance, weights) -> list:
    G = inst.graph(weights)
    nodes = nx.dijkstra_path(G, inst.b, inst.e, weight="weight")
    return [G.edges[u, v]["index"] for u, v in zip(nodes[:-1], nodes[1:])]


def heuristic_scenario(inst: GraphInstance, cell: Polyhedron, theta: float, z_lp,
                       path_lp: Sequence[int], backend: str = "simplex"):
    """Worst case of the best route that uses at most ``floor(theta * |path_lp|)``
    arcs of ``path_lp``; ``None`` when no such route exists."""
    A = len(inst.arcs)
    coef = np.zeros(A)
    coef[list(path_lp)] = -1.0
    limit = math.floor(theta * len(path_lp) + 1e-9)
    problem = build_rpp(inst, 0.0, extra=[(coef, -limit)], base_set=cell)
    try:
        res = solve_bnb(problem, Partition.single(cell), backend)
    except AssumptionError:
        return None
    s = Partition.ROOT
    best = None
    for node in res.tree:
        if node.status == "integral" and node.lp_objective <= res.incumbent_objective + 1e-9:
            best = node
            break
    if best is not None and best.duals.lam[(0, s)] > LAMBDA_THRESHOLD:
        return best.duals.u[(0, s)] / best.duals.lam[(0, s)]
    return problem.worst_case(cell, res.x, res.y[s], backend)[1]


def theta_detector(inst: GraphInstance, theta: float, backend: str = "simplex"):
    """Scenario detector for the overlap heuristic, pluggable into ``splitter.run``."""

    def detect(problem, partition, result):
        found = CriticalScenarioSet({s: [] for s in partition.leaves()})
        root = result.root
        for s in active_cells(problem, partition, result, backend=backend):
            cell = partition.region(s)
            lam = root.duals.lam[(0, s)]
            if lam > LAMBDA_THRESHOLD:
                z_lp = root.duals.u[(0, s)] / lam
            else:
                z_lp = problem.worst_case(cell, result.x, result.y[s], backend)[1]
            path = shortest_route(inst, inst.weights(z_lp))
            found.add(s, CriticalScenario(np.asarray(z_lp), root.id, 0))
            z_h = heuristic_scenario(inst, cell, theta, z_lp, path, backend)
            if z_h is not None:
                found.add(s, CriticalScenario(np.asarray(z_h), "heuristic", 0))
        return found

    return detect


# --------------------------------------------------------------------------
# experiment harness

@dataclass
class RPPConfig:
    N: Sequence[int] = (10,)
    B: Sequence[float] = (3,)
    thetas: Sequence[float] = (0.0, 0.5, 0.9)
    instances: int = 100
    seed: int = 20190101
    targets: Sequence[int] = (2, 10)
    backend: str = "highs"
    max_rounds: int = 50

    def __post_init__(self):
        if any(b <= 0 for b in self.B):
            raise ValueError("budget B must be positive")
        if any(not 0.0 <= th <= 1.0 for th in self.thetas):
            raise ValueError("theta must lie in [0, 1]")
        if self.instances < 1 or any(t < 1 for t in self.targets):
            raise ValueError("instances and targets must be positive")


ROW_FIELDS = ["N", "B", "method", "theta", "target_cells", "instance_seed", "t0",
              "t_bar", "t_underbar", "impr_pct", "impr_expost_pct"]


@dataclass
class ExperimentResult:
    rows: list = field(default_factory=list)
    curves: list = field(default_factory=list)  # per-instance improvement series

    def aggregate(self) -> list:
        groups = {}
        for row in self.rows:
            key = (row["N"], row["B"], row["method"], row["theta"], row["target_cells"])
            groups.setdefault(key, []).append(row)
        out = []
        for key, rows in sorted(groups.items(), key=lambda kv: _group_order(kv[0])):
            N, B, method, theta, target = key
            rec = {"N": N, "B": B, "method": method, "theta": theta, "target_cells": target,
                   "instances": len(rows),
                   "mean_impr_pct": float(np.mean([r["impr_pct"] for r in rows])),
                   "mean_impr_expost_pct": float(np.mean([r["impr_expost_pct"] for r in rows])),
                   "p_value": "", "p_value_expost": ""}
            if method == "heuristic":
                ref = groups[(N, B, "bnb", "", target)]
                for col, name in (("impr_pct", "p_value"), ("impr_expost_pct", "p_value_expost")):
                    a = np.array([r[col] for r in ref])
                    h = np.array([r[col] for r in rows])
                    rec[name] = paired_p_value(a, h)
            out.append(rec)
        return out

    def plot_data(self) -> list:
        groups = {}
        for c in self.curves:
            groups.setdefault((c["N"], c["B"], c["method"], c["theta"], c["cells"]), []).append(c)
        out = []
        for key, cs in sorted(groups.items(), key=lambda kv: (_group_order(kv[0][:4] + (0,)), kv[0][4])):
            N, B, method, theta, cells = key
            out.append({"N": N, "B": B, "method": method, "theta": theta, "cells": cells,
                        "mean_impr_pct": float(np.mean([c["impr_pct"] for c in cs])),
                        "mean_impr_expost_pct": float(np.mean([c["impr_expost_pct"] for c in cs]))})
        return out


def _group_order(key):
    N, B, method, theta, target = key
    return (N, B, target, 0 if method == "bnb" else 1, -1.0 if theta == "" else theta)


def paired_p_value(a, b) -> float:
    """Two-sided paired t-test; 1.0 when the differences are all zero."""
    from scipy import stats

    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    if len(diff) < 2 or np.allclose(diff, diff[0]):
        return 1.0 if np.allclose(diff, 0.0) else 0.0
    return float(stats.ttest_rel(a, b).pvalue)


def improvement(t0: float, t: float) -> float:
    return 100.0 * (t0 - t) / t0


def run_instance(inst: GraphInstance, B: float, method: str, theta, max_cells: int,
                 backend: str = "highs", max_rounds: int = 50):
    """Run the splitting loop for one instance and method; returns the trace."""
    problem = build_rpp(inst, B)

    def post(x, ys):
        return x, {s: clean_route(inst, y) for s, y in ys.items()}

    detector = None if method == "bnb" else theta_detector(inst, theta, backend)
    return run(problem, max_cells=max_cells, max_rounds=max_rounds, detector=detector,
               backend=backend, postprocess=post)


def instance_seed(seed: int, N: int, k: int) -> int:
    return sub_seed(seed, N, k)


def run_experiment(config: RPPConfig, progress=None) -> ExperimentResult:
    result = ExperimentResult()
    max_cells = max(config.targets)
    methods = [("bnb", "")] + [("heuristic", float(th)) for th in config.thetas]
    for N in config.N:
        for k in range(config.instances):
            iseed = instance_seed(config.seed, N, k)
            inst = generate_instance(N, iseed)
            for B in config.B:
                for method, theta in methods:
                    trace = run_instance(inst, B, method, theta, max_cells, config.backend,
                                         config.max_rounds)
                    t0 = trace[0].t_bar
                    for target in config.targets:
                        tb = trace.value_at(target, "t_bar")
                        tu = trace.value_at(target, "t_under")
                        result.rows.append({
                            "N": N, "B": B, "method": method, "theta": theta,
                            "target_cells": target, "instance_seed": iseed, "t0": t0,
                            "t_bar": tb, "t_underbar": tu,
                            "impr_pct": improvement(t0, tb),
                            "impr_expost_pct": improvement(t0, tu)})
                    for cells in range(1, max_cells + 1):
                        result.curves.append({
                            "N": N, "B": B, "method": method, "theta": theta, "cells": cells,
                            "impr_pct": improvement(t0, trace.value_at(cells, "t_bar")),
                            "impr_expost_pct": improvement(t0, trace.value_at(cells, "t_under"))})
                    if progress is not None:
                        progress(N, k, B, method, theta, trace)
    return result


def write_csv(rows: list, fields: Sequence[str], fh) -> None:
    w = csv.DictWriter(fh, fieldnames=list(fields), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: _fmt(row[k]) for k in fields})


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def to_csv_text(rows: list, fields: Sequence[str]) -> str:
    buf = io.StringIO()
    write_csv(rows, fields, buf)
    return buf.getvalue()

"""Self-check batteries run by ``robsplit verify``.

Each check returns a :class:`CheckResult`; the command exits nonzero when any
of them fails. ``inject`` deliberately corrupts one ingredient so that the
corresponding check can be seen to fire.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .bnb import INFEASIBLE, min_critical_cutset, solve_bnb
from .counterpart import NodeDuals, dual_feasibility_residual, dual_value
from .fixtures import interval_toy, tied_routes, two_quadrilaterals
from .lp import Optimal, StandardFormLP, check_outcome, solve_lp
from .model import (AffineParam, AROProblem, AssumptionError, Constraint,
                    DegenerateSplitError, Partition, Polyhedron, refine)
from .routeplan import build_rpp, generate_instance
from .splitter import bnb_detector, harvest_critical_scenarios, run

FAULTS = ("dual", "scenario")


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    failures: list = field(default_factory=list)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


# --------------------------------------------------------------------------
# random instances

def random_lp(rng, max_vars=8, max_rows=8, free=False) -> StandardFormLP:
    """Small LP with integer data; nonnegative variables unless ``free``."""
    n = int(rng.integers(1, max_vars + 1))
    m = int(rng.integers(0, max_rows + 1))
    k = int(rng.integers(0, min(2, m) + 1)) if m else 0
    A = rng.integers(-5, 6, size=(m, n)).astype(float)
    b = rng.integers(-5, 6, size=m).astype(float)
    c = rng.integers(-3, 6, size=n).astype(float)
    nonneg = np.ones(n, dtype=bool)
    if free:
        nonneg = rng.random(n) < 0.7
    return StandardFormLP.build(c, A[k:], b[k:], A[:k], b[:k], nonneg)


def _random_cell(rng, L) -> Polyhedron:
    P = np.vstack([np.eye(L), -np.eye(L)])
    p = np.concatenate([np.ones(L), np.zeros(L)])
    if rng.random() < 0.5:
        P = np.vstack([P, np.ones((1, L))])
        p = np.concatenate([p, [max(1.0, L / 2.0)]])
    return Polyhedron(P, p)


def random_problem(rng, max_L=4, max_dim=6, max_cons=3, integer=True,
                   objective_only=False) -> AROProblem:
    """Random instance with every variable in ``[0, 3]``.

    Covering rows ``a(z) x + w(z) y >= b`` keep the optimum away from zero;
    some of them depend on ``z`` unless ``objective_only``. The result may be
    infeasible, see :func:`random_feasible_problem`.
    """
    L = int(rng.integers(1, max_L + 1))
    d = int(rng.integers(2, max_dim + 1))
    d1 = int(rng.integers(0, d))
    d2 = d - d1
    m1 = int(rng.integers(0, min(d1, 2) + 1)) if integer and d1 else 0
    m2 = int(rng.integers(0, min(d2, 2) + 1)) if integer else 0
    if integer and m1 + m2 == 0:
        m2 = 1

    def param(dim, uncertain=True, scale=1.0):
        nom = rng.integers(1, 6, size=dim).astype(float)
        if not uncertain:
            return AffineParam(nom, np.zeros((dim, L)))
        return AffineParam(nom, scale * rng.integers(-2, 3, size=(dim, L)).astype(float))

    cons = []
    for _ in range(int(rng.integers(1, max_cons + 1))):
        unc = (not objective_only) and rng.random() < 0.6
        cons.append(Constraint(param(d1, unc, 0.25), param(d2, unc, 0.25),
                               float(rng.integers(2, 8)) + 0.5))
    for dim, first in ((d1, True), (d2, False)):
        for k in range(dim):
            e = np.zeros(dim)
            e[k] = -1.0
            own = AffineParam.constant(e, L)
            other = AffineParam.constant(np.zeros(d2 if first else d1), L)
            cons.append(Constraint(own, other, -3.0) if first else Constraint(other, own, -3.0))
    return AROProblem(param(d1), param(d2), cons, _random_cell(rng, L), m1, m2)


def random_feasible_problem(rng, **kw):
    """Draw :func:`random_problem` until the static problem is solvable; returns
    ``(problem, result)`` on the single-cell partition."""
    while True:
        problem = random_problem(rng, **kw)
        try:
            return problem, solve_bnb(problem, Partition.single(problem.base_set))
        except AssumptionError:
            continue


def plane_keeping_points(region: Polyhedron, points, rng, tries: int = 50):
    """Random plane cutting ``region`` with all ``points`` strictly on its
    ``<=`` side, or ``None``."""
    for _ in range(tries):
        n = rng.normal(size=region.dim)
        hi, _ = region.maximize(n)
        lo = -region.maximize(-n)[0]
        pad = 1e-3 * (hi - lo)
        top = max((float(n @ z) for z in points), default=-np.inf)
        start = max(top, lo) + pad
        if start < hi - pad:
            return n, float(rng.uniform(start, hi - pad))
    return None


# --------------------------------------------------------------------------
# checks

def check_lp(rng, cases: int = 300) -> CheckResult:
    """Simplex certificates are sound and agree with HiGHS."""
    bad = []
    for k in range(cases):
        lp = random_lp(rng, free=bool(k % 2))
        out = solve_lp(lp)
        ref = solve_lp(lp, "highs")
        issues = check_outcome(lp, out)
        if out.status != ref.status:
            issues.append(f"status {out.status} vs {ref.status}")
        elif isinstance(out, Optimal) and abs(out.objective - ref.objective) > 1e-7:
            issues.append(f"objective {out.objective} vs {ref.objective}")
        if isinstance(out, Optimal):
            slack = lp.A_ineq @ out.primal - lp.b_ineq
            if np.max(np.abs(out.dual_ineq * slack), initial=0.0) > 1e-6:
                issues.append("complementary slackness")
        if issues:
            bad.append((k, issues))
    return CheckResult("lp-kernel", not bad, f"{cases} random LPs, {len(bad)} failures", bad)


def _corrupt(duals: NodeDuals) -> NodeDuals:
    lam = dict(duals.lam)
    key = next(iter(lam))
    lam[key] = lam[key] + 0.5
    return NodeDuals(lam, duals.u, duals.mu, duals.objective, duals.ray)


def check_duality(rng, instances: int = 40, inject: str = "") -> CheckResult:
    """Every B&B node: reconstructed dual objective equals the LP value and
    the unpacked multipliers satisfy the dual constraints."""
    bad, nodes = [], 0
    for k in range(instances):
        problem, _ = random_feasible_problem(rng)
        part = Partition.single(problem.base_set)
        plane = plane_keeping_points(problem.base_set, [], rng)
        if plane is not None:
            part = refine(part, "r", *plane)
        result = solve_bnb(problem, part)
        regions = part.regions()
        for node in result.tree:
            d = _corrupt(node.duals) if inject == "dual" else node.duals
            nodes += 1
            res = dual_feasibility_residual(problem, regions, node.branches, d)
            gap = 0.0 if node.status == INFEASIBLE else abs(
                dual_value(problem, d, node.branches) - node.lp_objective)
            if res > 1e-6 or gap > 1e-6:
                bad.append((k, node.id, res, gap))
    return CheckResult("duality-audit", not bad, f"{nodes} nodes, {len(bad)} violations", bad)


def check_no_improvement(rng, instances: int = 15) -> CheckResult:
    """Refining so that each cell's scenarios stay in one child leaves the
    static optimum unchanged."""
    bad = []
    for k in range(instances):
        problem, result = random_feasible_problem(rng)
        part = result.partition
        scen = bnb_detector(problem, part, result)
        plane = plane_keeping_points(part.region("r"), scen.points("r"), rng)
        if plane is None:
            continue
        try:
            new = refine(part, "r", *plane)
        except DegenerateSplitError:
            continue
        again = solve_bnb(problem, new).incumbent_objective
        if abs(again - result.incumbent_objective) > 1e-6:
            bad.append((k, result.incumbent_objective, again))
    return CheckResult("no-improvement", not bad, f"{instances} instances, {len(bad)} changed", bad)


def check_stop_rule(rng) -> CheckResult:
    """After the stop rule fires, further random cuts leave the optimum alone."""
    bad = []
    for problem in (interval_toy(), tied_routes(), two_quadrilaterals()):
        trace = run(problem)
        last = trace[-1]
        if not last.stop:
            bad.append((problem.name, "did not stop"))
            continue
        part = last.partition
        for _ in range(5):
            s = part.leaves()[int(rng.integers(len(part)))]
            plane = plane_keeping_points(part.region(s), [], rng)
            if plane is not None:
                part = refine(part, s, *plane)
        value = solve_bnb(problem, part).incumbent_objective
        if abs(value - last.t_bar) > 1e-6:
            bad.append((problem.name, last.t_bar, value))
    return CheckResult("stop-rule", not bad, f"{3 - len(bad)}/3 fixtures certified", bad)


def check_scenario_detection(inject: str = "") -> CheckResult:
    """On the tied-routes fixture the LP root alone yields one scenario and the
    full cutset at least two, and splitting them lowers the optimum."""
    problem = tied_routes()
    part = Partition.single(problem.base_set)
    result = solve_bnb(problem, part)
    root = harvest_critical_scenarios(result, [result.root.id], part)
    full = harvest_critical_scenarios(result, min_critical_cutset(result), part)
    if inject == "scenario":
        full["r"] = full["r"][:1]
    n_root, n_full = len(root["r"]), len(full["r"])
    trace = run(problem, max_cells=2)
    improved = len(trace) > 1 and trace[1].t_bar < trace[0].t_bar - 1e-9
    ok = n_root == 1 and n_full >= 2 and improved
    detail = f"LP cutset: {n_root} scenario; full cutset: {n_full} scenarios"
    if improved:
        detail += f"; split lowers {trace[0].t_bar:g} to {trace[1].t_bar:g}"
    return CheckResult("scenario-detection", ok, detail)


def check_route_oracle(rng, instances: int = 10) -> CheckResult:
    """Static route optimum equals enumeration of routes and budget vertices."""
    bad = []
    for k in range(instances):
        inst = generate_instance(5, int(rng.integers(1 << 31)))
        B = int(rng.integers(1, 3))
        G = inst.graph()
        routes = [[G.edges[u, v]["index"] for u, v in zip(p[:-1], p[1:])]
                  for p in nx.all_simple_paths(G, inst.b, inst.e)]
        L = len(inst.arcs)
        vertices = []
        for ones in itertools.chain.from_iterable(
                itertools.combinations(range(L), j) for j in range(min(B, L) + 1)):
            z = np.zeros(L)
            z[list(ones)] = 1.0
            vertices.append(z)
        brute = min(max(float(inst.weights(z)[r].sum()) for z in vertices) for r in routes)
        problem = build_rpp(inst, B)
        value = solve_bnb(problem, Partition.single(problem.base_set)).incumbent_objective
        if abs(value - brute) > 1e-6:
            bad.append((k, value, brute))
    return CheckResult("route-oracle", not bad, f"{instances} instances, {len(bad)} mismatches", bad)


def run_all(seed: int = 0, inject: str = "") -> list[CheckResult]:
    if inject and inject not in FAULTS:
        raise ValueError(f"unknown fault {inject!r}; choose from {FAULTS}")
    rng = np.random.default_rng(seed)
    return [
        check_lp(rng),
        check_duality(rng, inject=inject),
        check_no_improvement(rng),
        check_stop_rule(rng),
        check_scenario_detection(inject=inject),
        check_route_oracle(rng),
    ]

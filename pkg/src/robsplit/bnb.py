"""LP-based branch-and-bound over the counterpart that keeps the dual solution
of every node, and the minimum critical cutset of the resulting tree."""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .counterpart import (LAMBDA_THRESHOLD, BranchingConstraint, CounterpartIndexMap,
                          NodeDuals, branch_rows, build_counterpart, unpack_duals)
from .lp import TOL_GAP, TOL_INT, Infeasible, StandardFormLP, Unbounded, solve_lp_with_extra_rows
from .model import AROProblem, AssumptionError, Partition

INTEGRAL, BRANCHED, INFEASIBLE, PRUNED = "integral", "branched", "infeasible", "pruned"

_PRUNE_TOL = 1e-9


@dataclass
class BnBNode:
    id: str
    parent: Optional[str]
    branch: Optional[BranchingConstraint]
    branches: tuple
    depth: int
    status: str = ""
    lp_objective: float = math.inf
    duals: Optional[NodeDuals] = None
    primal: Optional[np.ndarray] = None


@dataclass
class BnBResult:
    incumbent_objective: float
    x: np.ndarray
    y: dict
    tree: list
    imap: CounterpartIndexMap
    partition: Partition
    lp: StandardFormLP = field(repr=False)

    @property
    def nodes(self) -> dict:
        return {n.id: n for n in self.tree}

    def children(self) -> dict:
        kids = {n.id: [] for n in self.tree}
        for n in self.tree:
            if n.parent is not None:
                kids[n.parent].append(n.id)
        return kids

    @property
    def root(self) -> BnBNode:
        return self.tree[0]

    def dump(self) -> str:
        """One JSON object per node, for debugging."""
        lines = []
        for n in self.tree:
            br = None
            if n.branch is not None:
                br = {"d": n.branch.d.tolist(),
                      "e": {s: v.tolist() for s, v in n.branch.e.items() if np.any(v)},
                      "delta": n.branch.delta}
            lines.append(json.dumps({"id": n.id, "parent": n.parent, "status": n.status,
                                     "objective": n.lp_objective if math.isfinite(n.lp_objective) else "inf",
                                     "branch": br}))
        return "\n".join(lines) + "\n"


def _integer_columns(problem: AROProblem, imap: CounterpartIndexMap):
    """LP columns restricted to integers, with the variable each one encodes."""
    cols = []
    for k in range(problem.m1):
        cols.append((imap.x.start + k, ("x", k)))
    for s in imap.cells:
        for k in range(problem.m2):
            cols.append((imap.y[s].start + k, ("y", s, k)))
    return cols


def solve_bnb(problem: AROProblem, partition: Partition, backend: str = "simplex",
              node_limit: int = 100000) -> BnBResult:
    """Solve the static problem on ``partition`` to optimality.

    Nodes are explored best-bound first; among equal bounds the deeper node goes
    first, then creation order. Node ids are the parent id followed by ``0``
    (down branch) or ``1`` (up branch), the root is ``"n"``. See
    :func:`_branching_variable` for the branching rule.
    """
    base, imap = build_counterpart(problem, partition)
    int_cols = _integer_columns(problem, imap)
    order = _cell_order(problem, partition, backend) if int_cols else None
    tree: list[BnBNode] = []
    queue: list = []
    counter = 0
    best = math.inf
    best_primal = None

    def evaluate(node: BnBNode):
        nonlocal best, best_primal, counter
        rows, rhs = branch_rows(list(node.branches), imap)
        out = solve_lp_with_extra_rows(base, rows, rhs, backend)
        if isinstance(out, Unbounded):
            raise AssumptionError("feasible-bounded-relaxation",
                                  "the LP relaxation of the static problem is unbounded")
        node.duals = unpack_duals(out, imap)
        tree.append(node)
        if isinstance(out, Infeasible):
            node.status = INFEASIBLE
            return
        node.lp_objective = out.objective
        node.primal = out.primal
        if not int_cols or _is_integral(out.primal, int_cols):
            node.status = INTEGRAL
            if out.objective < best:
                best = out.objective
                best_primal = out.primal
            return
        heapq.heappush(queue, (round(out.objective, 9), -node.depth, counter, node))
        counter += 1

    root = BnBNode("n", None, None, (), 0)
    evaluate(root)
    if root.status == INFEASIBLE:
        raise AssumptionError("feasible-bounded-relaxation",
                              "the LP relaxation of the static problem is infeasible")

    while queue:
        _, _, _, node = heapq.heappop(queue)
        if node.lp_objective >= best - _PRUNE_TOL:
            node.status = PRUNED
            continue
        if len(tree) >= node_limit:
            raise RuntimeError(f"branch-and-bound exceeded {node_limit} nodes")
        col, var, value = _branching_variable(node, int_cols, order)
        node.status = BRANCHED
        down = BranchingConstraint.on_variable(problem, imap.cells, var, "<=", math.floor(value))
        up = BranchingConstraint.on_variable(problem, imap.cells, var, ">=", math.ceil(value))
        for suffix, br in (("0", down), ("1", up)):
            evaluate(BnBNode(node.id + suffix, node.id, br, node.branches + (br,), node.depth + 1))

    if best_primal is None:
        raise AssumptionError("feasible-static-problem", "the static problem has no integer solution")
    x = best_primal[imap.x].copy()
    y = {s: best_primal[imap.y[s]].copy() for s in imap.cells}
    x[:problem.m1] = np.round(x[:problem.m1])
    for s in y:
        y[s][:problem.m2] = np.round(y[s][:problem.m2])
    return BnBResult(best, x, y, tree, imap, partition, base)


def _is_integral(x: np.ndarray, int_cols) -> bool:
    return all(abs(x[c] - round(x[c])) <= TOL_INT for c, _ in int_cols)


def _cell_order(problem: AROProblem, partition: Partition, backend: str):
    """Cells by decreasing optimum of their own static problem, or ``None``.

    Without first-stage variables the cells share nothing but ``t``, so the
    bound of a node is the largest of the per-cell bounds. Resolving the cell
    with the largest optimum first closes the gap; branching wherever the bound
    currently sits instead multiplies the subtrees of all cells.
    """
    if problem.d1 or len(partition) < 2:
        return None
    value = {s: solve_bnb(problem, Partition.single(partition.region(s)), backend).incumbent_objective
             for s in partition.leaves()}
    return sorted(value, key=lambda s: (-round(value[s], 9), s))


def _branching_variable(node: BnBNode, int_cols, order=None):
    """Most fractional variable, cell by cell along ``order`` when given;
    otherwise among ``x`` and the ``y`` of cells whose epigraph row carries
    weight in the node duals, falling back to all variables.

    Cells with zero epigraph weight do not determine the node bound; branching
    on them first replicates the subtree of the binding cells.
    """
    if order is not None:
        for s in order:
            pick = _most_fractional(node.primal, [cv for cv in int_cols if cv[1][1] == s])
            if pick is not None:
                return pick
    lam = node.duals.lam
    binding = [(c, var) for c, var in int_cols
               if var[0] == "x" or lam[(0, var[1])] > LAMBDA_THRESHOLD]
    pick = _most_fractional(node.primal, binding)
    return pick if pick is not None else _most_fractional(node.primal, int_cols)


def _most_fractional(x: np.ndarray, int_cols):
    best = None
    for c, var in int_cols:
        frac = abs(x[c] - round(x[c]))
        if frac > TOL_INT and (best is None or frac > best[0] + 1e-12):
            best = (frac, c, var)
    if best is None:
        return None
    _, c, var = best
    return c, var, float(x[c])


def is_eligible(node: BnBNode, incumbent: float, tol: float = TOL_GAP) -> bool:
    return node.status == INFEASIBLE or node.lp_objective >= incumbent - tol


def min_critical_cutset(result: BnBResult, tol: float = TOL_GAP) -> list[str]:
    """Smallest set of eligible nodes meeting every root-to-leaf path.

    Bottom-up: ``cost(n) = min(1 if eligible else inf, sum of children)``;
    on ties the node itself is kept rather than its children.
    """
    kids = result.children()
    t_bar = result.incumbent_objective
    cost: dict = {}
    take: dict = {}
    for node in reversed(result.tree):  # children are created after parents
        own = 1 if is_eligible(node, t_bar, tol) else math.inf
        if not kids[node.id]:
            cost[node.id], take[node.id] = 1, True
            continue
        below = sum(cost[k] for k in kids[node.id])
        take[node.id] = own <= below
        cost[node.id] = min(own, below)
    chosen = []
    stack = [result.root.id]
    while stack:
        nid = stack.pop()
        if take[nid]:
            chosen.append(nid)
        else:
            stack.extend(reversed(kids[nid]))
    order = {n.id: k for k, n in enumerate(result.tree)}
    return sorted(chosen, key=order.__getitem__)

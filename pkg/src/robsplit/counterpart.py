"""Finite LP counterpart of a node problem and the mapping of its duals.

For a partition with leaves ``s`` and a list of branching rows, each robust
constraint over a cell ``{z : P z <= p}`` is dualized with multipliers
``kappa >= 0``. Variables are ordered ``t, x, (y^s, kappa_0^s, kappa_i^s ...)``
per leaf in id order. Inequality rows are the objective epigraphs, the
constraint rows and then the branching rows; equality rows hold the ``L``
coupling equations per dualized block.

Rows whose coefficients do not depend on ``z`` (a certain objective or a
certain constraint) are kept as plain rows without a ``kappa`` block: the block
would be zero at every optimum and its multiplier ``u`` would be an arbitrary
point of the cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lp import Infeasible, LPOutcome, Optimal, StandardFormLP
from .model import AROProblem, Partition

LAMBDA_THRESHOLD = 1e-8


class CounterpartError(RuntimeError):
    """An LP outcome that the counterpart can never legitimately produce."""


@dataclass(frozen=True)
class BranchingConstraint:
    """``d @ x + sum_s e[s] @ y^s >= delta``."""

    d: np.ndarray
    e: dict
    delta: float

    @classmethod
    def on_variable(cls, problem: AROProblem, cells, var: tuple, sense: str,
                    value: float) -> "BranchingConstraint":
        """Bound a single variable, ``var`` is ``("x", k)`` or ``("y", cell, k)``."""
        sign = 1.0 if sense == ">=" else -1.0
        d = np.zeros(problem.d1)
        e = {s: np.zeros(problem.d2) for s in cells}
        if var[0] == "x":
            d[var[1]] = sign
        else:
            e[var[1]][var[2]] = sign
        return cls(d, e, sign * float(value))

    def row(self, imap: "CounterpartIndexMap") -> np.ndarray:
        r = np.zeros(imap.n_vars)
        r[imap.x] = self.d
        for s, vec in self.e.items():
            r[imap.y[s]] = vec
        return r


@dataclass
class CounterpartIndexMap:
    cells: list
    t: int = 0
    x: slice = slice(0, 0)
    y: dict = field(default_factory=dict)
    kappa: dict = field(default_factory=dict)  # (i, s) -> slice
    epigraph_rows: dict = field(default_factory=dict)  # s -> ineq row
    constraint_rows: dict = field(default_factory=dict)  # (i, s) -> ineq row
    branch_rows: list = field(default_factory=list)
    objective_eq_rows: dict = field(default_factory=dict)  # s -> eq slice
    constraint_eq_rows: dict = field(default_factory=dict)  # (i, s) -> eq slice
    n_vars: int = 0
    n_ineq: int = 0
    n_eq: int = 0

    @property
    def n_base_ineq(self) -> int:
        return self.n_ineq - len(self.branch_rows)


@dataclass
class NodeDuals:
    """Multipliers of one node LP in the ``(lambda, u, mu)`` layout.

    ``lam`` is keyed by ``(i, s)`` with ``i = 0`` the objective epigraph and
    ``i >= 1`` the constraints; ``u`` only has keys for dualized blocks. For an
    infeasible node the values form a Farkas ray and ``objective`` is ``inf``.
    """

    lam: dict
    u: dict
    mu: np.ndarray
    objective: float
    ray: bool = False

    def scenarios(self, cell: str, threshold: float = LAMBDA_THRESHOLD):
        """Yield ``(i, u/lambda)`` for the dualized blocks of ``cell``."""
        for (i, s), u in sorted(self.u.items(), key=lambda kv: kv[0][0]):
            if s != cell:
                continue
            lam = self.lam[(i, s)]
            if lam > threshold:
                yield i, u / lam + 0.0  # no negative zeros in traces


def build_counterpart(problem: AROProblem, partition: Partition, branches=()):
    """Return ``(StandardFormLP, CounterpartIndexMap)`` for the node problem."""
    cells = partition.leaves()
    regions = {s: partition.region(s) for s in cells}
    return _assemble(problem, cells, regions, list(branches))


def _assemble(problem: AROProblem, cells, regions: dict, branches: list):
    L, d1, d2 = problem.L, problem.d1, problem.d2
    uncertain = problem.uncertain_constraints()
    dualized = ([0] if problem.uncertain_objective else []) + uncertain
    n_con = len(problem.constraints)
    imap = CounterpartIndexMap(cells=list(cells))
    pos = 1
    imap.x = slice(pos, pos + d1)
    pos += d1
    for s in cells:
        k = regions[s].P.shape[0]
        imap.y[s] = slice(pos, pos + d2)
        pos += d2
        for i in dualized:
            imap.kappa[(i, s)] = slice(pos, pos + k)
            pos += k
    n = imap.n_vars = pos

    r = 0
    for s in cells:
        imap.epigraph_rows[s] = r
        r += 1
        for i in range(1, n_con + 1):
            imap.constraint_rows[(i, s)] = r
            r += 1
    n_base = r
    imap.branch_rows = list(range(n_base, n_base + len(branches)))
    imap.n_ineq = n_base + len(branches)
    q = 0
    for s in cells:
        if problem.uncertain_objective:
            imap.objective_eq_rows[s] = slice(q, q + L)
            q += L
        for i in uncertain:
            imap.constraint_eq_rows[(i, s)] = slice(q, q + L)
            q += L
    imap.n_eq = q

    A = np.zeros((imap.n_ineq, n))
    b = np.zeros(imap.n_ineq)
    E = np.zeros((q, n))
    cx, cy = problem.cost_x, problem.cost_y
    for s in cells:
        P, p = regions[s].P, regions[s].p
        ys = imap.y[s]
        row = imap.epigraph_rows[s]
        A[row, imap.t] = 1.0
        A[row, imap.x] = -cx.nominal
        A[row, ys] = -cy.nominal
        if problem.uncertain_objective:
            A[row, imap.kappa[(0, s)]] = -p
            eq = imap.objective_eq_rows[s]
            E[eq, imap.x] = cx.perturbation.T
            E[eq, ys] = cy.perturbation.T
            E[eq, imap.kappa[(0, s)]] = -P.T
        for i, con in enumerate(problem.constraints, start=1):
            row = imap.constraint_rows[(i, s)]
            A[row, imap.x] = con.a.nominal
            A[row, ys] = con.w.nominal
            b[row] = con.b
            if con.uncertain:
                A[row, imap.kappa[(i, s)]] = -p
                eq = imap.constraint_eq_rows[(i, s)]
                E[eq, imap.x] = con.a.perturbation.T
                E[eq, ys] = con.w.perturbation.T
                E[eq, imap.kappa[(i, s)]] = P.T
    for j, br in zip(imap.branch_rows, branches):
        A[j] = br.row(imap)
        b[j] = br.delta
    c = np.zeros(n)
    c[imap.t] = 1.0
    nonneg = np.ones(n, dtype=bool)
    nonneg[imap.t] = False
    return StandardFormLP(c, A, b, E, np.zeros(q), nonneg), imap


def branch_rows(branches, imap: CounterpartIndexMap):
    """Rows and right-hand sides of ``branches`` in the LP column layout."""
    if not branches:
        return np.zeros((0, imap.n_vars)), np.zeros(0)
    return np.vstack([br.row(imap) for br in branches]), np.array([br.delta for br in branches])


def unpack_duals(outcome: LPOutcome, imap: CounterpartIndexMap) -> NodeDuals:
    """Map LP multipliers (or a Farkas ray) to ``(lambda, u, mu)``.

    The objective coupling rows carry ``-u_0`` and the constraint coupling rows
    ``+u_i``, following the sign convention of the counterpart rows.
    """
    if isinstance(outcome, Optimal):
        y, w, obj, ray = outcome.dual_ineq, outcome.dual_eq, outcome.objective, False
    elif isinstance(outcome, Infeasible):
        y, w, obj, ray = outcome.farkas_ineq, outcome.farkas_eq, np.inf, True
    else:
        raise CounterpartError("node LP unbounded; the relaxation should be bounded")
    lam, u = {}, {}
    for s in imap.cells:
        lam[(0, s)] = float(y[imap.epigraph_rows[s]])
        if s in imap.objective_eq_rows:
            u[(0, s)] = -np.asarray(w[imap.objective_eq_rows[s]])
    for (i, s), row in imap.constraint_rows.items():
        lam[(i, s)] = float(y[row])
    for (i, s), rows in imap.constraint_eq_rows.items():
        u[(i, s)] = np.asarray(w[rows])
    # every inequality row past the base block is a branching row
    mu = np.asarray(y[imap.n_base_ineq:])
    return NodeDuals(lam=lam, u=u, mu=mu, objective=obj, ray=ray)


def dual_value(problem: AROProblem, duals: NodeDuals, branches) -> float:
    """Objective of the dual node problem evaluated at ``duals``."""
    total = sum(duals.lam[(i, s)] * problem.constraints[i - 1].b
                for (i, s) in duals.lam if i > 0)
    total += sum(m * br.delta for m, br in zip(duals.mu, branches))
    return float(total)


def dual_feasibility_residual(problem: AROProblem, regions: dict, branches,
                              duals: NodeDuals) -> float:
    """Largest violation of the dual node constraints, assembled directly from
    the problem data rather than from the LP matrix."""
    cx, cy = problem.cost_x, problem.cost_y
    viol = []
    cells = list(regions)
    lam0 = sum(duals.lam[(0, s)] for s in cells)
    viol.append(abs(lam0 - (0.0 if duals.ray else 1.0)))
    gx = np.zeros(problem.d1)
    for s in cells:
        gx += duals.lam[(0, s)] * cx.nominal
        gy = duals.lam[(0, s)] * cy.nominal
        if (0, s) in duals.u:
            gx += cx.perturbation @ duals.u[(0, s)]
            gy = gy + cy.perturbation @ duals.u[(0, s)]
        for i, con in enumerate(problem.constraints, start=1):
            lam = duals.lam[(i, s)]
            gx -= lam * con.a.nominal
            gy = gy - lam * con.w.nominal
            if (i, s) in duals.u:
                gx -= con.a.perturbation @ duals.u[(i, s)]
                gy = gy - con.w.perturbation @ duals.u[(i, s)]
        for m, br in zip(duals.mu, branches):
            gy = gy - m * br.e.get(s, 0.0)
        viol.append(float(np.max(-gy, initial=0.0)))
        P, p = regions[s].P, regions[s].p
        for (i, t), u in duals.u.items():
            if t == s:
                viol.append(float(np.max(P @ u - duals.lam[(i, s)] * p, initial=0.0)))
    for m, br in zip(duals.mu, branches):
        gx -= m * br.d
    viol.append(float(np.max(-gx, initial=0.0)))
    viol.append(float(np.max(-np.array(list(duals.lam.values())), initial=0.0)))
    if len(duals.mu):
        viol.append(float(np.max(-duals.mu)))
    return max(viol)

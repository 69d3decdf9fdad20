"""Linear programs in canonical form and the solvers used throughout the package.

Problems are stated as::

    min  c @ x
    s.t. A_ineq @ x >= b_ineq
         A_eq   @ x == b_eq
         x_j >= 0 where nonneg[j], free otherwise

``solve_lp`` returns one of three outcomes. ``Optimal`` carries a basic
primal solution together with the dual multipliers of every row,
``Infeasible`` carries a Farkas certificate and ``Unbounded`` a recession
direction with negative cost. Two backends share this contract: a dense
two-phase primal simplex written here (the default) and scipy's HiGHS dual
simplex, which is much faster on the larger counterpart LPs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

TOL_FEAS = 1e-7
TOL_GAP = 1e-7
PIVOT_TOL = 1e-9
TOL_INT = 1e-6

_OPT_TOL = 1e-9
_DEGENERATE_LIMIT = 50
_REFACTOR_EVERY = 50


class LPInputError(ValueError):
    """Inconsistent dimensions in an LP."""


class LPNumericalError(ArithmeticError):
    """The simplex lost accuracy beyond repair."""


@dataclass(frozen=True)
class StandardFormLP:
    objective: np.ndarray
    A_ineq: np.ndarray
    b_ineq: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    nonneg: np.ndarray

    def __post_init__(self):
        n = len(self.objective)
        for name in ("A_ineq", "A_eq"):
            A = getattr(self, name)
            if A.ndim != 2 or A.shape[1] != n:
                raise LPInputError(f"{name} has shape {A.shape}, expected (*, {n})")
        if len(self.b_ineq) != self.A_ineq.shape[0]:
            raise LPInputError("b_ineq length does not match A_ineq rows")
        if len(self.b_eq) != self.A_eq.shape[0]:
            raise LPInputError("b_eq length does not match A_eq rows")
        if len(self.nonneg) != n:
            raise LPInputError("nonneg mask length does not match objective")

    @classmethod
    def build(cls, objective, A_ineq=None, b_ineq=None, A_eq=None, b_eq=None,
              nonneg=None) -> "StandardFormLP":
        """Convenience constructor accepting lists and ``None`` for empty blocks."""
        c = np.asarray(objective, dtype=float).reshape(-1)
        n = c.size

        def block(A, b):
            if A is None or len(A) == 0:
                return np.zeros((0, n)), np.zeros(0)
            A = np.asarray(A, dtype=float)
            if A.ndim == 1:
                A = A.reshape(1, -1)
            return A, np.asarray(b, dtype=float).reshape(-1)

        Ai, bi = block(A_ineq, b_ineq)
        Ae, be = block(A_eq, b_eq)
        mask = np.ones(n, dtype=bool) if nonneg is None else np.asarray(nonneg, dtype=bool)
        return cls(c, Ai, bi, Ae, be, mask)

    @property
    def num_vars(self) -> int:
        return len(self.objective)

    def with_extra_rows(self, rows, rhs) -> "StandardFormLP":
        rows = np.asarray(rows, dtype=float).reshape(-1, self.num_vars)
        rhs = np.asarray(rhs, dtype=float).reshape(-1)
        if len(rhs) != rows.shape[0]:
            raise LPInputError("extra rows and rhs disagree in length")
        return StandardFormLP(
            self.objective,
            np.vstack([self.A_ineq, rows]),
            np.concatenate([self.b_ineq, rhs]),
            self.A_eq, self.b_eq, self.nonneg,
        )


@dataclass(frozen=True)
class Optimal:
    primal: np.ndarray
    dual_ineq: np.ndarray
    dual_eq: np.ndarray
    objective: float
    status: str = field(default="optimal", init=False)


@dataclass(frozen=True)
class Infeasible:
    farkas_ineq: np.ndarray
    farkas_eq: np.ndarray
    status: str = field(default="infeasible", init=False)


@dataclass(frozen=True)
class Unbounded:
    ray: np.ndarray
    status: str = field(default="unbounded", init=False)


LPOutcome = Union[Optimal, Infeasible, Unbounded]


# --------------------------------------------------------------------------
# certificate checks (shared by tests and the verification battery)

def primal_residual(lp: StandardFormLP, x: np.ndarray) -> float:
    """Largest constraint or sign violation of ``x``."""
    viol = [0.0]
    if lp.A_ineq.shape[0]:
        viol.append(float(np.max(lp.b_ineq - lp.A_ineq @ x)))
    if lp.A_eq.shape[0]:
        viol.append(float(np.max(np.abs(lp.A_eq @ x - lp.b_eq))))
    if lp.nonneg.any():
        viol.append(float(np.max(-x[lp.nonneg])))
    return max(viol)


def dual_residual(lp: StandardFormLP, y_ineq: np.ndarray, y_eq: np.ndarray,
                  cost: np.ndarray | None = None) -> float:
    """Largest violation of dual feasibility.

    With ``cost=None`` the LP objective is used; pass zeros to check a Farkas
    direction instead.
    """
    c = lp.objective if cost is None else cost
    reduced = c - lp.A_ineq.T @ y_ineq - lp.A_eq.T @ y_eq
    viol = [0.0]
    if len(y_ineq):
        viol.append(float(np.max(-y_ineq)))
    if lp.nonneg.any():
        viol.append(float(np.max(-reduced[lp.nonneg])))
    if (~lp.nonneg).any():
        viol.append(float(np.max(np.abs(reduced[~lp.nonneg]))))
    return max(viol)


def dual_objective(lp: StandardFormLP, y_ineq: np.ndarray, y_eq: np.ndarray) -> float:
    return float(lp.b_ineq @ y_ineq + lp.b_eq @ y_eq)


def check_outcome(lp: StandardFormLP, out: LPOutcome, tol: float = 1e-6) -> list[str]:
    """Return a list of violated certificate conditions (empty when sound)."""
    problems = []
    scale = 1.0 + float(np.max(np.abs(np.concatenate(
        [lp.b_ineq, lp.b_eq, lp.objective, [0.0]]))))
    if isinstance(out, Optimal):
        if primal_residual(lp, out.primal) > tol * scale:
            problems.append("primal infeasible")
        if dual_residual(lp, out.dual_ineq, out.dual_eq) > tol * scale:
            problems.append("dual infeasible")
        gap = abs(out.objective - dual_objective(lp, out.dual_ineq, out.dual_eq))
        if gap > tol * scale:
            problems.append(f"duality gap {gap:.3g}")
    elif isinstance(out, Infeasible):
        y, w = out.farkas_ineq, out.farkas_eq
        zero = np.zeros(lp.num_vars)
        norm = 1.0 + float(np.max(np.abs(np.concatenate([y, w, [0.0]]))))
        if dual_residual(lp, y, w, cost=zero) > tol * norm:
            problems.append("farkas combination not dominated")
        if dual_objective(lp, y, w) <= tol * norm:
            problems.append("farkas rhs not positive")
    else:
        d = out.ray
        homog = StandardFormLP(lp.objective, lp.A_ineq, np.zeros_like(lp.b_ineq),
                               lp.A_eq, np.zeros_like(lp.b_eq), lp.nonneg)
        if primal_residual(homog, d) > tol * (1.0 + float(np.max(np.abs(d)))):
            problems.append("ray not a recession direction")
        if lp.objective @ d >= -tol:
            problems.append("ray cost not negative")
    return problems


# --------------------------------------------------------------------------
# dense two-phase simplex

class _Tableau:
    """Row-flipped equality system ``M x = r`` with ``r >= 0`` and artificials."""

    def __init__(self, M: np.ndarray, r: np.ndarray, basis: list[int], n_struct: int,
                 degenerate_limit: int):
        self.m, width = M.shape
        self.degenerate_limit = degenerate_limit
        self.n_struct = n_struct
        self.M = M  # original columns, kept for refactorization
        self.T = np.hstack([M, r.reshape(-1, 1)])
        self._r = r.reshape(-1, 1).copy()
        self.basis = basis
        self.is_art = np.zeros(width, dtype=bool)
        self.is_art[n_struct:] = True

    def run(self, cost: np.ndarray, allow_art: bool):
        """Pivot to optimality for ``cost``; return ``("optimal", None)`` or
        ``("unbounded", column)``."""
        T, m = self.T, self.m
        width = T.shape[1] - 1
        eligible = np.ones(width, dtype=bool) if allow_art else ~self.is_art
        # reduced-cost row
        d = cost - cost[self.basis] @ T[:, :width]
        degenerate = stall = 0
        bland = self.degenerate_limit == 0
        max_iter = 50 * (m + width) + 1000
        for it in range(max_iter):
            if it and it % _REFACTOR_EVERY == 0:
                self.refactor()
                d = cost - cost[self.basis] @ T[:, :width]
            cand = np.flatnonzero(eligible & (d < -_OPT_TOL))
            if cand.size == 0:
                return "optimal", None
            if bland:
                q = int(cand[0])
            else:
                q = int(cand[np.argmin(d[cand])])
            col = T[:, q]
            rhs = T[:, width]
            basic_art = self.is_art[self.basis]
            # basic artificials sit at zero in phase 2 and must leave first
            forced = np.flatnonzero(basic_art & (np.abs(col) > PIVOT_TOL)) if not allow_art else []
            if len(forced):
                rows = forced
                ratios = np.zeros(len(rows))
            else:
                rows = np.flatnonzero(col > max(PIVOT_TOL, 1e-11 * np.abs(col).max(initial=0.0)))
                if rows.size == 0:
                    return "unbounded", q
                ratios = rhs[rows] / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * (1.0 + abs(best))]
            if bland:
                p = int(ties[np.argmin(np.asarray(self.basis)[ties])])
            else:
                p = int(ties[np.argmax(np.abs(col[ties]))])
            step = rhs[p] / col[p]
            if step <= 1e-12:
                degenerate += 1
                stall += 1
                if degenerate > self.degenerate_limit:
                    bland = True
                if stall > 5 * m + 100:
                    raise LPNumericalError("simplex stalled on a degenerate vertex")
            else:
                stall = 0
                if self.degenerate_limit:
                    degenerate = 0
                    bland = False
            self._pivot(p, q)
            d = d - d[q] * T[p, :width]
        raise LPNumericalError("simplex iteration limit reached")

    def _pivot(self, p: int, q: int):
        T = self.T
        piv = T[p, q]
        T[p] /= piv
        col = T[:, q].copy()
        col[p] = 0.0
        T -= np.outer(col, T[p])
        T[:, q] = 0.0
        T[p, q] = 1.0
        self.basis[p] = q

    def dual_run(self, cost: np.ndarray, allow_art: bool) -> bool:
        """Dual simplex from a basis that is optimal for ``cost`` but may have
        negative basic values; ``False`` when a row proves infeasibility."""
        T, m = self.T, self.m
        width = T.shape[1] - 1
        eligible = np.ones(width, dtype=bool) if allow_art else ~self.is_art
        d = cost - cost[self.basis] @ T[:, :width]
        for it in range(50 * (m + width) + 1000):
            if it and it % _REFACTOR_EVERY == 0:
                self.refactor()
                d = cost - cost[self.basis] @ T[:, :width]
            rhs = T[:, width]
            p = int(np.argmin(rhs))
            if rhs[p] >= -TOL_FEAS:
                return True
            row = T[p, :width]
            cols = np.flatnonzero(eligible & (row < -PIVOT_TOL))
            if cols.size == 0:
                return False
            ratios = np.maximum(d[cols], 0.0) / -row[cols]
            best = ratios.min()
            ties = cols[ratios <= best + 1e-12 * (1.0 + best)]
            q = int(ties[np.argmax(np.abs(row[ties]))])
            self._pivot(p, q)
            d = d - d[q] * T[p, :width]
        raise LPNumericalError("dual simplex iteration limit reached")

    def set_rhs(self, r: np.ndarray):
        self._r = np.asarray(r, dtype=float).reshape(-1, 1).copy()
        self.refactor()

    def refactor(self):
        """Recompute the tableau from the original columns to shed the
        rounding error accumulated by successive pivots."""
        B = self.M[:, self.basis]
        T = np.linalg.solve(B, np.hstack([self.M, self._r]))
        T[np.abs(T) < 1e-14] = 0.0
        rhs = T[:, -1]
        rhs[(rhs < 0) & (rhs > -TOL_FEAS)] = 0.0
        self.T[:] = T

    def basis_matrix(self) -> np.ndarray:
        return self.M[:, self.basis]


def _simplex(lp: StandardFormLP, degenerate_limit: int = _DEGENERATE_LIMIT,
             perturb: float = 0.0) -> LPOutcome:
    n = lp.num_vars
    free = np.flatnonzero(~lp.nonneg)
    mi, me = lp.A_ineq.shape[0], lp.A_eq.shape[0]
    m = mi + me
    n_split = n + free.size
    n_struct = n_split + mi

    M = np.zeros((m, n_struct))
    M[:mi, :n] = lp.A_ineq
    M[mi:, :n] = lp.A_eq
    M[:mi, n:n_split] = -lp.A_ineq[:, free]
    M[mi:, n:n_split] = -lp.A_eq[:, free]
    M[:mi, n_split:] = -np.eye(mi)
    r = np.concatenate([lp.b_ineq, lp.b_eq])
    sign = np.where(r < 0, -1.0, 1.0)
    M *= sign[:, None]
    r = r * sign

    # rows whose slack already has +1 after flipping start with the slack basic
    basis = []
    art_rows = []
    for i in range(m):
        if i < mi and sign[i] < 0:
            basis.append(n_split + i)
        else:
            basis.append(-1)
            art_rows.append(i)
    A_art = np.zeros((m, len(art_rows)))
    for k, i in enumerate(art_rows):
        A_art[i, k] = 1.0
        basis[i] = n_struct + k
    full = np.hstack([M, A_art])
    # a small positive shift of the right-hand side breaks the degeneracy that
    # can stall the pivoting; it is removed again before reading the answer
    shift = np.zeros(m)
    if perturb:
        shift = perturb * (1.0 + np.abs(r)) * np.random.default_rng(0).uniform(0.5, 1.0, m)
    tab = _Tableau(full, r + shift, basis, n_struct, degenerate_limit)

    width = full.shape[1]
    cost1 = np.zeros(width)
    cost1[n_struct:] = 1.0
    if art_rows:
        status, _ = tab.run(cost1, allow_art=True)
        if perturb and float(cost1[tab.basis] @ tab.T[:, -1]) > TOL_FEAS:
            # the shifted problem looks infeasible; settle it on the true data
            tab.set_rhs(r)
            tab.dual_run(cost1, allow_art=True)
            shift = np.zeros(m)
        B = tab.basis_matrix()
        xB = np.linalg.solve(B, r)
        phase1 = float(cost1[tab.basis] @ xB)
        if phase1 > TOL_FEAS * (1.0 + float(np.max(np.abs(r), initial=0.0))):
            y = np.linalg.solve(B.T, cost1[tab.basis]) * sign
            return Infeasible(farkas_ineq=np.maximum(y[:mi], 0.0), farkas_eq=y[mi:])

    c_split = np.concatenate([lp.objective, -lp.objective[free], np.zeros(mi)])
    cost2 = np.concatenate([c_split, np.zeros(width - n_struct)])
    status, q = tab.run(cost2, allow_art=False)
    if status == "optimal" and np.any(shift):
        tab.set_rhs(r)
        if not tab.dual_run(cost2, allow_art=False):
            raise LPNumericalError("perturbed simplex lost feasibility")

    B = tab.basis_matrix()
    xB = np.linalg.solve(B, r)
    if status == "unbounded":
        dB = -np.linalg.solve(B, full[:, q])
        dfull = np.zeros(width)
        dfull[tab.basis] = dB
        dfull[q] = 1.0
        ray = dfull[:n].copy()
        ray[free] -= dfull[n:n_split]
        ray[np.abs(ray) < 1e-13] = 0.0
        return Unbounded(ray=ray)

    xfull = np.zeros(width)
    xfull[tab.basis] = xB
    x = xfull[:n].copy()
    x[free] -= xfull[n:n_split]
    y = np.linalg.solve(B.T, cost2[tab.basis]) * sign
    y_ineq = y[:mi]
    # clip sub-tolerance negatives produced by roundoff
    y_ineq = np.where((y_ineq < 0) & (y_ineq > -1e-9), 0.0, y_ineq)
    x[lp.nonneg] = np.where((x[lp.nonneg] < 0) & (x[lp.nonneg] > -1e-9), 0.0, x[lp.nonneg])
    return Optimal(primal=x, dual_ineq=y_ineq, dual_eq=y[mi:], objective=float(lp.objective @ x))


# --------------------------------------------------------------------------
# HiGHS backend

def _highs(lp: StandardFormLP) -> LPOutcome:
    from scipy.optimize import linprog

    bounds = [(0, None) if nn else (None, None) for nn in lp.nonneg]
    kw = {}
    if lp.A_ineq.shape[0]:
        kw.update(A_ub=-lp.A_ineq, b_ub=-lp.b_ineq)
    if lp.A_eq.shape[0]:
        kw.update(A_eq=lp.A_eq, b_eq=lp.b_eq)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = linprog(lp.objective, bounds=bounds, method="highs-ds", **kw)
    if res.status == 0:
        y_ineq = -res.ineqlin.marginals if lp.A_ineq.shape[0] else np.zeros(0)
        y_eq = res.eqlin.marginals if lp.A_eq.shape[0] else np.zeros(0)
        return Optimal(primal=np.asarray(res.x), dual_ineq=np.maximum(y_ineq, 0.0),
                       dual_eq=np.asarray(y_eq), objective=float(lp.objective @ res.x))
    if res.status == 2:
        return _highs_farkas(lp)
    if res.status == 3:
        return _highs_ray(lp)
    raise LPNumericalError(f"HiGHS failed: {res.message}")


def _highs_farkas(lp: StandardFormLP) -> LPOutcome:
    # phase-one LP: its optimal duals are a Farkas certificate. HiGHS presolve
    # may call a feasible unbounded LP infeasible, so a zero optimum means ray.
    from scipy.optimize import linprog

    n = lp.num_vars
    mi, me = lp.A_ineq.shape[0], lp.A_eq.shape[0]
    c = np.concatenate([np.zeros(n), np.ones(mi + 2 * me)])
    A_ub = np.hstack([-lp.A_ineq, -np.eye(mi), np.zeros((mi, 2 * me))])
    A_eq = np.hstack([lp.A_eq, np.zeros((me, mi)), np.eye(me), -np.eye(me)])
    bounds = [(0, None) if nn else (None, None) for nn in lp.nonneg] + [(0, None)] * (mi + 2 * me)
    kw = {}
    if mi:
        kw.update(A_ub=A_ub, b_ub=-lp.b_ineq)
    if me:
        kw.update(A_eq=A_eq, b_eq=lp.b_eq)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = linprog(c, bounds=bounds, method="highs-ds", **kw)
    if res.status != 0:
        raise LPNumericalError(f"phase-one LP failed: {res.message}")
    if res.fun <= TOL_FEAS * (1.0 + float(np.max(np.abs(np.concatenate([lp.b_ineq, lp.b_eq, [0.0]]))))):
        return _highs_ray(lp)
    y = -res.ineqlin.marginals if mi else np.zeros(0)
    w = res.eqlin.marginals if me else np.zeros(0)
    return Infeasible(farkas_ineq=np.maximum(y, 0.0), farkas_eq=np.asarray(w))


def _highs_ray(lp: StandardFormLP) -> Unbounded:
    from scipy.optimize import linprog

    bounds = [(0, 1) if nn else (-1, 1) for nn in lp.nonneg]
    kw = {}
    if lp.A_ineq.shape[0]:
        kw.update(A_ub=-lp.A_ineq, b_ub=np.zeros(lp.A_ineq.shape[0]))
    if lp.A_eq.shape[0]:
        kw.update(A_eq=lp.A_eq, b_eq=np.zeros(lp.A_eq.shape[0]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = linprog(lp.objective, bounds=bounds, method="highs-ds", **kw)
    if res.status != 0 or res.fun >= 0:
        raise LPNumericalError("could not recover an unbounded ray")
    return Unbounded(ray=np.asarray(res.x))


BACKENDS = {"simplex": _simplex, "highs": _highs}


def solve_lp(lp: StandardFormLP, backend: str = "simplex") -> LPOutcome:
    """Solve ``lp``.

    The simplex backend verifies its own answer. On a failed check it retries
    with Bland's rule, and on a failed check or an iteration limit it retries
    once more on a slightly perturbed right-hand side before giving up with
    ``LPNumericalError``.
    """
    try:
        solver = BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown LP backend {backend!r}") from None
    if backend != "simplex":
        return solver(lp)
    try:
        out = solver(lp)
        if isinstance(out, Optimal) and check_outcome(lp, out, tol=1e-6):
            out = _simplex(lp, degenerate_limit=0)
    except LPNumericalError:
        out = None
    if out is None or (isinstance(out, Optimal) and check_outcome(lp, out, tol=1e-6)):
        # heavy degeneracy: retry on a perturbed right-hand side
        out = _simplex(lp, perturb=1e-7)
        bad = check_outcome(lp, out, tol=1e-6) if isinstance(out, Optimal) else []
        if bad:
            raise LPNumericalError("simplex solution failed verification: " + ", ".join(bad))
    return out


def solve_lp_with_extra_rows(lp: StandardFormLP, rows: Sequence, rhs: Sequence,
                             backend: str = "simplex") -> LPOutcome:
    """Solve ``lp`` with additional ``rows @ x >= rhs`` appended after its own
    inequality rows; their multipliers are the trailing entries of
    ``dual_ineq``."""
    if len(rhs) == 0:
        return solve_lp(lp, backend)
    return solve_lp(lp.with_extra_rows(rows, rhs), backend)


def is_finite_outcome(out: LPOutcome) -> bool:
    return isinstance(out, Optimal) and math.isfinite(out.objective)

"""Brute-force references kept independent of the solver code paths."""

import itertools

import networkx as nx
import numpy as np


def lp_vertex_minimum(c, A_ineq, b_ineq, A_eq, b_eq, tol=1e-9):
    """Minimum of ``c @ x`` over basic feasible solutions of
    ``A_ineq x >= b_ineq, A_eq x = b_eq, x >= 0``.

    Every choice of ``n`` tight constraints (all equalities plus enough
    inequality rows / sign bounds) is solved directly. Returns ``None`` when
    no basic solution is feasible.
    """
    c = np.asarray(c, float)
    n = c.size
    A_ineq = np.asarray(A_ineq, float).reshape(-1, n)
    A_eq = np.asarray(A_eq, float).reshape(-1, n)
    b_ineq = np.asarray(b_ineq, float).reshape(-1)
    b_eq = np.asarray(b_eq, float).reshape(-1)
    # keep a linearly independent subset of the equalities for the bases; the
    # dropped ones are still enforced by the feasibility filter below
    keep = []
    for k in range(A_eq.shape[0]):
        if np.linalg.matrix_rank(A_eq[keep + [k]]) == len(keep) + 1:
            keep.append(k)
    E, f = A_eq[keep], b_eq[keep]
    cand_rows = np.vstack([A_ineq, np.eye(n)])
    cand_rhs = np.concatenate([b_ineq, np.zeros(n)])
    need = n - E.shape[0]
    if need < 0:
        subsets = []
    else:
        subsets = list(itertools.combinations(range(cand_rows.shape[0]), need))
    if not subsets:
        return None
    idx = np.array(subsets, dtype=int).reshape(len(subsets), need)
    M = np.concatenate([np.broadcast_to(E, (len(subsets),) + E.shape), cand_rows[idx]], axis=1)
    r = np.concatenate([np.broadcast_to(f, (len(subsets), f.size)), cand_rhs[idx]], axis=1)
    det = np.linalg.det(M)
    ok = np.abs(det) > 1e-9
    if not ok.any():
        return None
    X = np.linalg.solve(M[ok], r[ok][..., None])[..., 0]
    feas = np.all(X >= -tol, axis=1)
    if A_ineq.shape[0]:
        feas &= np.all(X @ A_ineq.T >= b_ineq - tol, axis=1)
    if A_eq.shape[0]:
        feas &= np.all(np.abs(X @ A_eq.T - b_eq) <= tol * 10, axis=1)
    if not feas.any():
        return None
    return float(np.min(X[feas] @ c))


def budget_vertices(L, B):
    """Vertices of ``{z in [0,1]^L : sum z <= B}`` for integer ``B``."""
    B = int(B)
    out = []
    for k in range(min(L, B) + 1):
        for ones in itertools.combinations(range(L), k):
            z = np.zeros(L)
            z[list(ones)] = 1.0
            out.append(z)
    return out


def simple_routes(inst):
    """All simple start-end paths as lists of arc indices."""
    G = nx.DiGraph()
    for k, (i, j) in enumerate(inst.arcs):
        G.add_edge(i, j, index=k)
    routes = []
    for nodes in nx.all_simple_paths(G, inst.b, inst.e):
        routes.append([G.edges[u, v]["index"] for u, v in zip(nodes[:-1], nodes[1:])])
    return routes


def route_length(inst, route, z):
    w = (1.0 + np.asarray(z) / 2.0) * inst.d
    return float(sum(w[k] for k in route))


def rpp_static_bruteforce(inst, B, vertices=None):
    """``min over routes max over budget vertices`` of the route length."""
    V = budget_vertices(len(inst.arcs), B) if vertices is None else vertices
    return min(max(route_length(inst, r, z) for z in V) for r in simple_routes(inst))


def rpp_expost_bruteforce(inst, B, routes):
    """``max_z min_r`` route length over the budget set.

    The inner minimum is concave, so the maximizer need not be a vertex. By
    the minimax theorem the value equals ``min over mixtures mu of max over
    vertices of sum_r mu_r len_r(v)``, a small LP over the enumerated vertices,
    solved here with HiGHS.
    """
    from scipy.optimize import linprog

    V = budget_vertices(len(inst.arcs), B)
    F = np.array([[route_length(inst, r, v) for r in routes] for v in V])
    k = len(routes)
    # variables (mu_1..mu_k, tau): min tau, F mu <= tau, sum mu = 1
    c = np.zeros(k + 1)
    c[-1] = 1.0
    A_ub = np.hstack([F, -np.ones((len(V), 1))])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(len(V)),
                  A_eq=np.concatenate([np.ones(k), [0.0]]).reshape(1, -1), b_eq=[1.0],
                  bounds=[(0, None)] * k + [(None, None)], method="highs")
    assert res.status == 0
    return float(res.fun)

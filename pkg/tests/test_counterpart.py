import numpy as np
import pytest

from helpers import feasible_random_aro
from oracles import budget_vertices, route_length, rpp_static_bruteforce, simple_routes
from robsplit.bnb import solve_bnb
from robsplit.counterpart import (BranchingConstraint, CounterpartError, build_counterpart,
                                  dual_feasibility_residual, dual_value, unpack_duals)
from robsplit.fixtures import interval_toy
from robsplit.lp import Optimal, Unbounded, solve_lp
from robsplit.model import AffineParam, AROProblem, Partition, refine
from robsplit.routeplan import build_rpp, generate_instance


def test_interval_toy_counterpart():
    problem = interval_toy()
    lp, imap = build_counterpart(problem, Partition.single(problem.base_set))
    out = solve_lp(lp)
    assert isinstance(out, Optimal)
    assert out.objective == pytest.approx(1.0)
    assert out.primal[imap.y["r"]] == pytest.approx([1.0])
    assert out.primal[imap.kappa[(0, "r")]] == pytest.approx([1.0, 0.0])


def test_interval_toy_duals():
    problem = interval_toy()
    lp, imap = build_counterpart(problem, Partition.single(problem.base_set))
    duals = unpack_duals(solve_lp(lp), imap)
    assert duals.lam[(0, "r")] == pytest.approx(1.0)
    assert duals.u[(0, "r")] == pytest.approx([1.0])
    assert len(duals.mu) == 0
    assert [z.tolist() for _, z in duals.scenarios("r")] == [pytest.approx([1.0])]


def test_interval_toy_two_cells_mass_on_upper_cell():
    problem = interval_toy()
    part = refine(Partition.single(problem.base_set), "r", [1.0], 0.5)
    lp, imap = build_counterpart(problem, part)
    out = solve_lp(lp)
    duals = unpack_duals(out, imap)
    assert out.objective == pytest.approx(1.0)
    assert duals.lam[(0, "r0")] + duals.lam[(0, "r1")] == pytest.approx(1.0)
    assert duals.lam[(0, "r1")] == pytest.approx(1.0)  # r1 holds z = 1
    assert duals.u[(0, "r1")] == pytest.approx([1.0])


def test_index_map_covers_layout_once():
    rng = np.random.default_rng(0)
    problem, _ = feasible_random_aro(rng)
    part = refine(Partition.single(problem.base_set), "r", np.ones(problem.L), 0.3)
    lp, imap = build_counterpart(problem, part)
    cols = [imap.t] + list(range(lp.num_vars))[imap.x]
    for s in imap.cells:
        cols += list(range(lp.num_vars))[imap.y[s]]
    for sl in imap.kappa.values():
        cols += list(range(lp.num_vars))[sl]
    assert sorted(cols) == list(range(lp.num_vars))
    rows = list(imap.epigraph_rows.values()) + list(imap.constraint_rows.values())
    assert sorted(rows) == list(range(imap.n_base_ineq))
    eq = []
    for sl in list(imap.objective_eq_rows.values()) + list(imap.constraint_eq_rows.values()):
        eq += list(range(imap.n_eq))[sl]
    assert sorted(eq) == list(range(imap.n_eq))


def test_zero_perturbation_equals_nominal_lp():
    rng = np.random.default_rng(4)
    for _ in range(10):
        problem, _ = feasible_random_aro(rng, integer=False)
        L = problem.L
        flat = lambda v: AffineParam(v.nominal, np.zeros_like(v.perturbation))
        from robsplit.model import Constraint
        nominal = AROProblem(flat(problem.cost_x), flat(problem.cost_y),
                             [Constraint(flat(c.a), flat(c.w), c.b) for c in problem.constraints],
                             problem.base_set)
        lp, _ = build_counterpart(nominal, Partition.single(problem.base_set))
        c = np.concatenate([nominal.cost_x.nominal, nominal.cost_y.nominal])
        A = np.array([np.concatenate([k.a.nominal, k.w.nominal]) for k in nominal.constraints])
        b = np.array([k.b for k in nominal.constraints])
        from robsplit.lp import StandardFormLP
        ref = solve_lp(StandardFormLP.build(c, A, b), "highs")
        out = solve_lp(lp)
        assert out.status == ref.status
        if isinstance(out, Optimal):
            assert out.objective == pytest.approx(ref.objective, abs=1e-7)
        assert L == problem.L


@pytest.mark.parametrize("seed", range(8))
def test_rpp_four_nodes_against_enumeration(seed):
    inst = generate_instance(4, seed)
    problem = build_rpp(inst, 2)
    lp, _ = build_counterpart(problem, Partition.single(problem.base_set))
    value = solve_lp(lp).objective
    routes = simple_routes(inst)
    V = budget_vertices(len(inst.arcs), 2)
    static = rpp_static_bruteforce(inst, 2)
    adjustable = max(min(route_length(inst, r, z) for r in routes) for z in V)
    if len(routes) == 1:
        assert value == pytest.approx(static, abs=1e-7)
    # the relaxation sits between the fully adjustable and the static value
    assert adjustable - 1e-7 <= value <= static + 1e-7


def test_branching_rows_and_multipliers():
    rng = np.random.default_rng(2)
    problem, result = feasible_random_aro(rng)
    part = result.partition
    for node in result.tree:
        if node.status == "infeasible":
            continue
        lp, imap = build_counterpart(problem, part, node.branches)
        out = solve_lp(lp)
        duals = unpack_duals(out, imap)
        assert len(duals.mu) == len(node.branches)
        assert dual_value(problem, duals, node.branches) == pytest.approx(out.objective, abs=1e-6)


def test_variable_branch_normalized_to_geq():
    rng = np.random.default_rng(1)
    problem, _ = feasible_random_aro(rng)
    br = BranchingConstraint.on_variable(problem, ["r"], ("y", "r", 0), "<=", 2)
    assert br.e["r"][0] == -1.0 and br.delta == -2.0
    assert np.count_nonzero(br.e["r"]) + np.count_nonzero(br.d) == 1


@pytest.mark.parametrize("seed", range(6))
def test_duality_audit_and_scenarios_in_cell(seed):
    rng = np.random.default_rng(100 + seed)
    problem, _ = feasible_random_aro(rng)
    part = Partition.single(problem.base_set)
    try:
        part = refine(part, "r", rng.normal(size=problem.L), 0.0 + problem.L / 4)
    except Exception:
        pass
    result = solve_bnb(problem, part)
    regions = part.regions()
    for node in result.tree:
        d = node.duals
        assert dual_feasibility_residual(problem, regions, node.branches, d) <= 1e-6
        if not d.ray:
            assert dual_value(problem, d, node.branches) == pytest.approx(node.lp_objective, abs=1e-6)
            assert sum(d.lam[(0, s)] for s in regions) == pytest.approx(1.0)
        for s, R in regions.items():
            for _, z in d.scenarios(s):
                assert R.contains(z)


def test_unbounded_outcome_is_a_contract_violation():
    problem = interval_toy()
    _, imap = build_counterpart(problem, Partition.single(problem.base_set))
    with pytest.raises(CounterpartError):
        unpack_duals(Unbounded(ray=np.zeros(3)), imap)

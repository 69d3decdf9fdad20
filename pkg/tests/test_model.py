import numpy as np
import pytest

from robsplit.model import (AffineParam, AROProblem, AssumptionError, Constraint,
                            DegenerateSplitError, DomainError, Partition, Polyhedron,
                            load_problem, locate, problem_from_dict, problem_to_dict,
                            refine, save_problem, validate)
from robsplit.routeplan import build_rpp, generate_instance
from robsplit.splitter import bisecant_plane


def _toy(base):
    L = base.dim
    cost_y = AffineParam(np.zeros(1), np.ones((1, L)) / L)
    con = Constraint(AffineParam.constant([], L), AffineParam.constant([1.0], L), 1.0)
    return AROProblem(AffineParam.constant([], L), cost_y, [con], base)


def test_box_is_valid():
    rep = validate(_toy(Polyhedron.box([0, 0], [1, 1])))
    assert rep.bounds == pytest.approx(np.array([[0, 1], [0, 1]]))
    assert rep.objective_only


def test_unbounded_set_names_assumption():
    with pytest.raises(AssumptionError) as exc:
        validate(_toy(Polyhedron(-np.eye(2), np.zeros(2))))
    assert exc.value.assumption == "nonempty-bounded-set"


def test_empty_set_rejected():
    empty = Polyhedron(np.array([[1.0], [-1.0]]), np.array([0.0, -1.0]))
    with pytest.raises(AssumptionError):
        validate(_toy(empty))


def test_rpp_problem_is_objective_only():
    inst = generate_instance(6, 1)
    problem = build_rpp(inst, 2)
    assert validate(problem).objective_only
    assert all(not np.any(c.a.perturbation) and not np.any(c.w.perturbation)
               for c in problem.constraints)


def test_square_split_into_rectangles():
    part = refine(Partition.single(Polyhedron.box([0, 0], [1, 1])), "r", [1, 0], 0.5)
    assert part.leaves() == ["r0", "r1"]
    left, right = part.region("r0"), part.region("r1")
    assert left.maximize(np.array([1.0, 0.0]))[0] == pytest.approx(0.5)
    assert right.maximize(np.array([-1.0, 0.0]))[0] == pytest.approx(-0.5)
    assert right.maximize(np.array([1.0, 0.0]))[0] == pytest.approx(1.0)


def test_plane_outside_cell_is_degenerate():
    part = Partition.single(Polyhedron.box([0, 0], [1, 1]))
    with pytest.raises(DegenerateSplitError):
        refine(part, "r", [1, 0], 2.0)
    with pytest.raises(DegenerateSplitError):
        refine(part, "r", [1, 0], 1.0)  # touches only the boundary


def test_refine_rejects_non_leaf():
    part = refine(Partition.single(Polyhedron.box([0, 0], [1, 1])), "r", [1, 0], 0.5)
    with pytest.raises(KeyError):
        refine(part, "r", [0, 1], 0.5)


def test_budget_set_bisecant_children_hold_generators():
    L = 3
    P = np.vstack([np.eye(L), -np.eye(L), np.ones((1, L))])
    base = Polyhedron(P, np.concatenate([np.ones(L), np.zeros(L), [2.0]]))
    za, zb = np.array([1.0, 1.0, 0.0]), np.array([0.0, 1.0, 1.0])
    normal, offset = bisecant_plane(za, zb)
    part = refine(Partition.single(base), "r", normal, offset)
    for s in part.leaves():
        assert not part.region(s).is_empty()
    assert part.region("r1").contains(za) != part.region("r0").contains(za)
    assert part.region("r0").contains(zb) and not part.region("r0").contains(za)
    assert part.region("r1").contains(za) and not part.region("r1").contains(zb)


def test_locate_examples():
    base = Polyhedron.box([0, 0], [1, 1])
    assert locate(Partition.single(base), [0.3, 0.3]) == "r"
    part = refine(Partition.single(base), "r", [1, 0], 0.5)
    assert locate(part, [0.25, 0.9]) == "r0"
    assert locate(part, [0.75, 0.9]) == "r1"
    assert locate(part, [0.5, 0.2]) == "r0"
    with pytest.raises(DomainError):
        locate(part, [1.5, 0.0])


def test_locate_boundary_prefers_smallest_id():
    base = Polyhedron.box([0, 0], [1, 1])
    part = refine(Partition.single(base), "r", [-1, 0], -0.5)  # r0 is the right half
    part = refine(part, "r0", [0, 1], 0.5)
    z = [0.5, 0.5]
    owners = sorted(s for s in part.leaves() if part.region(s).contains(z))
    assert locate(part, z) == owners[0] == "r00"


def _random_partition(rng, base, splits):
    part = Partition.single(base)
    while len(part) < splits + 1:
        s = part.leaves()[int(rng.integers(len(part)))]
        try:
            part = refine(part, s, rng.normal(size=base.dim), float(rng.uniform(0.2, 0.8)))
        except DegenerateSplitError:
            continue
    return part


def test_every_point_claimed_by_exactly_one_containing_leaf():
    rng = np.random.default_rng(0)
    base = Polyhedron.box([0, 0, 0], [1, 1, 1])
    part = _random_partition(rng, base, 7)
    regions = part.regions()
    for z in rng.random((1000, 3)):
        s = locate(part, z)
        assert regions[s].contains(z)
        owners = [t for t, R in regions.items() if R.contains(z, tol=-1e-12)]
        assert len(owners) <= 1  # interiors are disjoint


def test_leaf_region_is_base_plus_ancestor_cuts():
    rng = np.random.default_rng(1)
    base = Polyhedron.box([0, 0], [1, 1])
    part = _random_partition(rng, base, 5)
    for s in part.leaves():
        R = part.region(s)
        chain = part.ancestry(s)
        assert R.P.shape[0] == base.P.shape[0] + len(chain) == base.P.shape[0] + len(s) - 1
        assert np.array_equal(R.P[:base.P.shape[0]], base.P)
        for k, c in enumerate(chain):
            assert np.array_equal(R.P[base.P.shape[0] + k], np.asarray(c.cut[0]))
            assert R.p[base.P.shape[0] + k] == c.cut[1]
        assert not R.is_empty()


def test_sibling_cuts_are_opposite():
    rng = np.random.default_rng(2)
    part = _random_partition(rng, Polyhedron.box([0, 0], [1, 1]), 4)
    for c in part.cells:
        if c.id.endswith("0"):
            other = part.cell(c.id[:-1] + "1")
            assert np.array_equal(np.asarray(c.cut[0]), -np.asarray(other.cut[0]))
            assert c.cut[1] == -other.cut[1]


def test_json_round_trip(tmp_path):
    problem = build_rpp(generate_instance(5, 3), 2)
    path = tmp_path / "p.json"
    save_problem(problem, path)
    again = load_problem(path)
    assert problem_to_dict(again) == problem_to_dict(problem)


def test_malformed_document():
    with pytest.raises(ValueError):
        problem_from_dict({"L": 1})
    with pytest.raises(ValueError):
        problem_from_dict({"L": 1, "d2": 2, "cost_y": {"nominal": [1.0]},
                           "base_set": {"P": [[1.0]], "p": [1.0]}})


def test_mismatched_perturbation_rejected():
    with pytest.raises(ValueError):
        AROProblem(AffineParam.constant([], 2), AffineParam(np.ones(1), np.ones((1, 3))), [],
                   Polyhedron.box([0, 0], [1, 1]))

"""Piecewise constant decision rules for two-stage mixed-integer robust problems,
refined by splitting the uncertainty set at scenarios read off the duals of a
branch-and-bound tree."""

from .bnb import BnBResult, min_critical_cutset, solve_bnb
from .counterpart import NodeDuals, build_counterpart, unpack_duals
from .lp import Infeasible, Optimal, StandardFormLP, Unbounded, solve_lp, solve_lp_with_extra_rows
from .model import (AffineParam, AROProblem, AssumptionError, Constraint, Partition, Polyhedron,
                    load_problem, locate, refine, save_problem, validate)
from .splitter import (CriticalScenarioSet, RoundTrace, bisecant_plane, check_stop,
                       ex_post_correction, harvest_critical_scenarios, run, split_round)

__all__ = [
    "AROProblem", "AffineParam", "AssumptionError", "BnBResult", "Constraint",
    "CriticalScenarioSet", "Infeasible", "NodeDuals", "Optimal", "Partition", "Polyhedron",
    "RoundTrace", "StandardFormLP", "Unbounded", "bisecant_plane", "build_counterpart",
    "check_stop", "ex_post_correction", "harvest_critical_scenarios", "load_problem", "locate",
    "min_critical_cutset", "refine", "run", "save_problem", "solve_bnb", "solve_lp",
    "solve_lp_with_extra_rows", "split_round", "unpack_duals", "validate",
]

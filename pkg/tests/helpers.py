"""Shortcuts to the package's random instance generators."""

from robsplit.verify import random_feasible_problem, random_lp, random_problem


def feasible_random_aro(rng, **kw):
    return random_feasible_problem(rng, **kw)


__all__ = ["feasible_random_aro", "random_lp", "random_problem"]

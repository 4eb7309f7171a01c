"""Shared, lazily computed fixture results.

Solves, LP classifications and qualification reports on the built-in
problems are expensive, so each is computed once per session.
"""
from __future__ import annotations

from functools import lru_cache

import pytest

from impgap.fixtures import load_fixture, make_problem, reference_process
from impgap.gap_probe import probe
from impgap.normality import classify
from impgap.qualifications import check_all
from impgap.solver import SolveOptions, solve

NAMES = ("example-4.1", "example-4.2", "example-4.3")
CELLS = 400


class Results:
    @lru_cache(maxsize=None)
    def problem(self, name):
        return make_problem(name)

    @lru_cache(maxsize=None)
    def reference(self, name, cells=CELLS):
        return reference_process(self.problem(name), cells)

    @lru_cache(maxsize=None)
    def reference_multipliers(self, name, cells=CELLS):
        return load_fixture(name).reference_multipliers(cells)

    @lru_cache(maxsize=None)
    def solved(self, name):
        return solve(self.problem(name), SolveOptions(cells=CELLS, multistart=16, seed=0))

    @lru_cache(maxsize=None)
    def classified(self, name):
        return classify(self.problem(name), self.reference(name))

    @lru_cache(maxsize=None)
    def qualifications(self, name):
        return check_all(self.problem(name), self.reference(name))

    @lru_cache(maxsize=None)
    def probed(self, name):
        return probe(self.problem(name), self.reference(name), 0.5)

    def __hash__(self):
        return id(self)


_RESULTS = Results()


@pytest.fixture(scope="session")
def results() -> Results:
    return _RESULTS

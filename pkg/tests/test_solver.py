import numpy as np
import pytest

from conftest import NAMES
from impgap.model import ProblemSpec, cost, d_infty, extended_graph, feasibility
from impgap.solver import NoFeasiblePointError, SolveOptions, Transcription, solve, solve_strict

CELLS_STRICT = 200


def _jump_problem(final):
    """Scalar state moved only by a nondecreasing impulse, cost = total variation."""
    return ProblemSpec.from_json(
        {
            "n": 1,
            "m": 1,
            "q": 0,
            "drift": [{"const": 0.0}],
            "impulse": [[{"const": 1.0}]],
            "cost": {"terms": [[1.0, [0, 0, 0, 0, 1]]]},
            "target": {"box": {"lo": [0, 0, 0, final], "hi": [0, 0, 5, final]}},
            "cone": {"orthant": 1},
            "controls": {"finite": [[]]},
        }
    )


@pytest.mark.parametrize("name", NAMES)
def test_fixture_optimum_reached(results, name):
    res = results.solved(name)
    assert res.feasible
    # the reference minimizer has cost 0, which is the known optimum
    assert res.objective == pytest.approx(cost(results.problem(name), results.reference(name)), abs=1e-3)
    assert res.feasibility.worst <= 1e-6
    assert res.objective == pytest.approx(cost(results.problem(name), res.process), abs=1e-12)


@pytest.mark.parametrize("name", NAMES)
def test_solution_respects_the_control_normalisation(results, name):
    proc = results.solved(name).process
    np.testing.assert_allclose(proc.omega0 + np.linalg.norm(proc.omega, axis=1), 1.0, atol=1e-9)
    assert np.all(proc.omega0 >= -1e-12)
    for w in proc.omega:
        assert results.problem(name).cone.contains(w, 1e-8)


def test_jump_problem_has_unit_optimum():
    res = solve(_jump_problem(1.0), SolveOptions(cells=40, multistart=4))
    assert res.feasible
    assert res.objective == pytest.approx(1.0, abs=1e-6)
    assert res.process.y[-1, 0] == pytest.approx(1.0, abs=1e-6)


def test_unreachable_target_is_reported():
    with pytest.raises(NoFeasiblePointError) as info:
        solve(_jump_problem(-1.0), SolveOptions(cells=40, multistart=4))
    assert info.value.result.feasibility.worst > 0.1
    assert info.value.result.status != "ok"


def test_same_seed_same_answer():
    pb = _jump_problem(0.7)
    a = solve(pb, SolveOptions(cells=30, multistart=3, seed=5))
    b = solve(pb, SolveOptions(cells=30, multistart=3, seed=5))
    np.testing.assert_array_equal(a.process.y, b.process.y)
    np.testing.assert_array_equal(a.process.omega, b.process.omega)
    assert a.objective == b.objective


@pytest.mark.parametrize("name", ["example-4.1", "example-4.3"])
def test_clock_bound_is_respected(results, name):
    pb, ref = results.problem(name), results.reference(name)
    for eps in (0.1, 0.05):
        res = solve_strict(pb, eps, ref, 0.5, SolveOptions(cells=CELLS_STRICT, multistart=0))
        assert res.feasible
        assert res.process.omega0.min() >= eps - 1e-6
        assert res.diagnostics["d_infty_to_anchor"] <= 0.5 + 1e-6
        assert res.objective == pytest.approx(0.0, abs=1e-3)


def test_strict_admissible_sets_are_nested(results):
    # a process admissible at a larger eps stays admissible at a smaller one
    pb, ref = results.problem("example-4.3"), results.reference("example-4.3")
    res = solve_strict(pb, 0.2, ref, 0.5, SolveOptions(cells=CELLS_STRICT, multistart=0))
    proc = res.process
    for eps in (0.1, 0.05):
        assert proc.omega0.min() >= eps
    assert feasibility(pb, proc).worst <= 1e-6
    assert d_infty(extended_graph(proc), extended_graph(ref)) <= 0.5


def test_options_validated():
    with pytest.raises(ValueError):
        SolveOptions(cells=0)
    with pytest.raises(ValueError):
        SolveOptions(eps=1.0)
    with pytest.raises(ValueError):
        solve_strict(_jump_problem(1.0), 0.1, None, 0.0)


@pytest.mark.parametrize("name", ["example-4.1", "example-4.3"])
def test_analytic_gradient_matches_central_differences(results, name):
    pb = results.problem(name)
    tr = Transcription(pb, SolveOptions(cells=12), anchor=results.reference(name), delta=0.5)
    rng = np.random.default_rng(0)
    x = tr.random_start(rng)
    n_eq, n_in = tr.n_constraints()
    lam_eq, lam_in = rng.standard_normal(n_eq), rng.uniform(0, 1, n_in)
    _, grad = tr.evaluate(x, lam_eq, lam_in, 7.0)
    h = 1e-6
    for i in rng.choice(x.size, size=min(40, x.size), replace=False):
        e = np.zeros_like(x)
        e[i] = h
        fd = (tr.evaluate(x + e, lam_eq, lam_in, 7.0)[0] - tr.evaluate(x - e, lam_eq, lam_in, 7.0)[0]) / (2 * h)
        assert grad[i] == pytest.approx(fd, rel=1e-4, abs=1e-5), i

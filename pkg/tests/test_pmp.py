import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from impgap.fixtures import degenerate_multipliers, make_problem, reference_process
from impgap.model import integrate
from impgap.pmp import (
    Measure,
    MultiplierSet,
    accumulate_q,
    check_nondegeneracy,
    check_pmp,
    hamiltonian,
)


def zero_multipliers(M, n=3, N=6):
    return MultiplierSet(np.zeros(M + 1), np.zeros((M + 1, n)), 0.0, 0.0, tuple(Measure.empty(1 + n) for _ in range(N)))


def test_hamiltonian_examples():
    pb = make_problem("example-4.2")
    x = np.array([0.3, 0.5, -0.2])
    p = np.array([1.0, 2.0, -1.0])
    f = np.array([0.0, x[1] * x[2], 0.0])
    H = hamiltonian(pb, 0.4, x, 0.7, p, 0.0, 1.0, np.zeros(2), np.zeros(1))
    assert H == pytest.approx(0.7 + p @ f)
    q = np.array([0.25, 0.0, 0.0])
    H = hamiltonian(pb, 1.0, x, 0.0, q, 0.0, 0.0, np.array([-1.0, 0.0]), np.zeros(1))
    assert H == pytest.approx(-q[0])
    H = hamiltonian(pb, 1.0, x, 5.0, np.zeros(3), -1.0, 0.0, np.array([0.6, 0.8]), np.zeros(1))
    assert H == pytest.approx(-1.0)


def test_hamiltonian_equals_costate_times_velocity():
    pb = make_problem("example-4.2")
    rng = np.random.default_rng(0)
    M = 30
    w0 = rng.uniform(0, 1, M)
    ang = rng.uniform(0, 2 * np.pi, M)
    w = (1 - w0)[:, None] * np.column_stack([np.cos(ang), np.sin(ang)])
    proc = integrate(pb, np.linspace(0, 1, M + 1), w0, w, np.zeros((M, 1)), 0.0, [0.2, 0.4, -0.1])
    p0, p, pi = rng.standard_normal(M), rng.standard_normal((M, 3)), -0.3
    H = hamiltonian(pb, proc.y0[:-1], proc.y[:-1], p0, p, pi, proc.omega0, proc.omega, proc.alpha)
    dyds = np.diff(proc.y, axis=0) / proc.ds[:, None]
    expected = p0 * proc.omega0 + np.einsum("ki,ki->k", p, dyds) + pi * np.linalg.norm(proc.omega, axis=1)
    np.testing.assert_allclose(H, expected, atol=1e-12)


def test_accumulate_without_measure_is_costate():
    s = np.linspace(0, 2, 11)
    rng = np.random.default_rng(1)
    mult = MultiplierSet(rng.standard_normal(11), rng.standard_normal((11, 3)), 0.0, 1.0, (Measure.empty(4),))
    q0, q = accumulate_q(mult, s)
    np.testing.assert_array_equal(q0, mult.p0)
    np.testing.assert_array_equal(q, mult.p)


def test_accumulate_degenerate_set_vanishes_after_zero():
    pb = make_problem("example-4.3")
    ref = reference_process(pb, 40)
    q0, q = accumulate_q(degenerate_multipliers(ref), ref.s)
    np.testing.assert_allclose(q[1:], 0.0, atol=1e-15)
    np.testing.assert_allclose(q[0], [-1.0, 0.0, 0.0])


def test_accumulate_atoms_at_both_ends():
    s = np.linspace(0, 1, 5)
    a = Measure.atoms_at([0.0], [2.0], [[0.0, 1.0, 0.0]])
    b = Measure.atoms_at([1.0], [3.0], [[0.0, 0.0, 1.0]])
    mult = MultiplierSet(np.zeros(5), np.zeros((5, 2)), 0.0, 0.0, (a, b))
    _, q = accumulate_q(mult, s)
    np.testing.assert_allclose(q[2], [2.0, 0.0])
    np.testing.assert_allclose(q[-1], [2.0, 3.0])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_accumulation_is_additive_and_linear(seed):
    rng = np.random.default_rng(seed)
    s = np.linspace(0, 1, 9)

    def measure():
        k = int(rng.integers(1, 4))
        return Measure.atoms_at(rng.choice(s, k), rng.uniform(0, 2, k), rng.standard_normal((k, 3)))

    a, b = measure(), measure()
    zeros = (np.zeros(9), np.zeros((9, 2)), 0.0, 0.0)
    _, qa = accumulate_q(MultiplierSet(*zeros, (a,)), s)
    _, qb = accumulate_q(MultiplierSet(*zeros, (b,)), s)
    _, qab = accumulate_q(MultiplierSet(*zeros, (a, b)), s)
    _, q2a = accumulate_q(MultiplierSet(*zeros, (a.scaled(2.5),)), s)
    np.testing.assert_allclose(qab, qa + qb, atol=1e-12)
    np.testing.assert_allclose(q2a, 2.5 * qa, atol=1e-12)


@pytest.mark.parametrize("name", ["example-4.2", "example-4.3"])
def test_reference_multipliers_pass(results, name):
    pb, ref = results.problem(name), results.reference(name)
    rep = check_pmp(pb, ref, results.reference_multipliers(name))
    assert rep.passed, rep.failures
    assert rep.adjoint_residual <= 1e-6 and rep.transversality_distance <= 1e-6 and rep.max_defect <= 1e-6


def test_zero_multipliers_fail_nontriviality():
    pb = make_problem("example-4.2")
    ref = reference_process(pb, 40)
    rep = check_pmp(pb, ref, zero_multipliers(40))
    assert not rep.passed
    assert "nontriviality" in rep.failures
    assert rep.nontriviality == 0.0


def test_scaled_passing_set_still_passes(results):
    pb, ref = results.problem("example-4.3"), results.reference("example-4.3")
    mult = results.reference_multipliers("example-4.3")
    for c in (0.01, 7.0):
        assert check_pmp(pb, ref, mult.scaled(c)).passed


def test_perturbed_costate_is_rejected(results):
    pb, ref = results.problem("example-4.3"), results.reference("example-4.3")
    mult = results.reference_multipliers("example-4.3")
    bad = MultiplierSet(mult.p0, mult.p + [0.0, 0.5, 0.0], mult.pi, mult.lam, mult.measures)
    assert not check_pmp(pb, ref, bad).passed


def test_nondegeneracy_margins(results):
    ref3 = results.reference("example-4.3")
    nd = check_nondegeneracy(ref3, results.reference_multipliers("example-4.3"))
    assert nd.degenerate and nd.margin == 0.0
    ref2 = results.reference("example-4.2")
    assert check_nondegeneracy(ref2, results.reference_multipliers("example-4.2")).margin >= 1.0


def test_multiplier_json_round_trip(results):
    mult = results.reference_multipliers("example-4.3")
    back = MultiplierSet.from_json(json.loads(json.dumps(mult.to_json())))
    np.testing.assert_array_equal(back.p, mult.p)
    assert back.measures[0].masses.tolist() == [1.0]
    assert back.to_json() == mult.to_json()


def test_sign_conventions_enforced():
    with pytest.raises(ValueError):
        MultiplierSet(np.zeros(3), np.zeros((3, 1)), 0.5, 0.0)
    with pytest.raises(ValueError):
        MultiplierSet(np.zeros(3), np.zeros((3, 1)), 0.0, -1.0)
    with pytest.raises(ValueError):
        Measure.atoms_at([0.0], [-1.0], [[1.0, 0.0]])

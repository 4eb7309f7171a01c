import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from impgap.extension import FastArcError, embed, invert, strictify
from impgap.fixtures import make_problem, reference_process, strict_sequence
from impgap.model import (
    ProblemSpec,
    StrictProcess,
    cost,
    d_infty,
    extended_graph,
    feasibility,
    integrate,
    integrate_strict,
    strict_graph,
)
from oracles import random_strict_case, strict_cost


def _one_dim_problem(cone):
    return ProblemSpec.from_json(
        {
            "n": 1,
            "m": 1,
            "q": 0,
            "drift": [{"const": 0.0}],
            "impulse": [[{"const": 1.0}]],
            "cost": {"terms": [[1.0, [0, 0, 0, 1, 0]]]},
            "target": {"box": {"lo": [None] * 4, "hi": [None] * 4}},
            "cone": cone,
            "controls": {"finite": [[]]},
        }
    )


def test_constant_control_embeds_with_unit_clock():
    pb = make_problem("example-4.2")
    t = np.linspace(0.5, 2.0, 11)
    strict = integrate_strict(pb, t, np.full((11, 2), 0.3), np.zeros((10, 1)), [0.2, 0.1, 0.0])
    ext = embed(strict)
    assert ext.S == pytest.approx(1.5)
    np.testing.assert_allclose(ext.omega0, 1.0)
    np.testing.assert_allclose(ext.omega, 0.0)


def test_linear_control_halves_the_clock():
    pb = _one_dim_problem({"orthant": 1})
    t = np.linspace(0, 1, 9)
    strict = integrate_strict(pb, t, t[:, None], np.zeros((8, 0)), [0.0])
    ext = embed(strict)
    assert ext.S == pytest.approx(2.0)
    np.testing.assert_allclose(ext.omega0, 0.5)
    np.testing.assert_allclose(ext.omega[:, 0], 0.5)
    np.testing.assert_allclose(ext.y0, ext.s / 2)


def test_unit_clock_inverts_to_constant_control():
    pb = make_problem("example-4.2")
    M = 10
    ext = integrate(pb, np.linspace(0, 1, M + 1), np.ones(M), np.zeros((M, 2)), np.zeros((M, 1)), 0.0, [0.1, 0.2, 0.3])
    np.testing.assert_allclose(invert(ext).u, 0.0)


def test_invert_refuses_fast_arcs():
    pb = make_problem("example-4.1")
    ref = reference_process(pb, 40)
    with pytest.raises(FastArcError) as info:
        invert(ref)
    assert info.value.cells == list(range(20, 40))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_round_trip_and_cost(seed):
    pb, strict = random_strict_case(np.random.default_rng(seed))
    ext = embed(strict)
    back = invert(ext)
    assert d_infty(strict_graph(back), strict_graph(strict)) < 1e-9
    assert cost(pb, ext) == strict_cost(pb, strict)
    # S = (t2 - t1) + v(t2)
    assert ext.S == pytest.approx(strict.t2 - strict.t1 + strict.v[-1], abs=1e-12)
    np.testing.assert_allclose(ext.omega0 + np.linalg.norm(ext.omega, axis=1), 1.0, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_embed_preserves_feasibility(seed):
    pb, strict = random_strict_case(np.random.default_rng(seed))
    ext = embed(strict)
    # rebuild the problem around the process's own endpoints so that it is feasible
    data = pb.to_json()
    e = pb.endpoint_vector(ext)
    data["target"] = {"product": [{"point": [e[0]]}, {"point": e[1:4].tolist()}, {"point": [e[4]]}, {"point": e[5:8].tolist()}]}
    data["constraints"] = []
    own = ProblemSpec.from_json(data)
    assert feasibility(own, ext).worst <= 1e-12
    assert feasibility(own, embed(invert(ext))).worst <= 1e-9


def test_strictify_identity_when_clock_already_fast():
    pb = make_problem("example-4.3")
    proc = strict_sequence(pb, 4, 40)
    res = strictify(pb, proc, 0.2)
    np.testing.assert_array_equal(res.process.omega0, proc.omega0)
    np.testing.assert_array_equal(res.process.omega, proc.omega)
    assert res.control_distance == 0.0


def test_strictify_first_example():
    pb = make_problem("example-4.1")
    ref = reference_process(pb, 40)
    res = strictify(pb, ref, 0.1)
    np.testing.assert_allclose(res.process.omega0[20:], 0.1)
    np.testing.assert_allclose(res.process.omega[20:], [[-0.9, 0.0]] * 20)
    assert res.process.y0[-1] == pytest.approx(1.1)
    # hand computation: the clock overshoots {1} by 0.1 and x1 stops at 0.1, which is
    # 0.1 outside the final ball |x - (-1, 0, 0)| <= 1
    assert res.process.y[-1, 0] == pytest.approx(0.1)
    assert feasibility(pb, res.process).endpoint_distance == pytest.approx(np.hypot(0.1, 0.1), abs=1e-12)
    assert res.control_distance <= 2 * 0.1
    # initial point and ordinary controls untouched
    np.testing.assert_array_equal(res.process.y[0], ref.y[0])
    np.testing.assert_array_equal(res.process.alpha, ref.alpha)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.01, 0.9))
def test_strictify_keeps_controls_in_cone(seed, eps):
    rng = np.random.default_rng(seed)
    pb, strict = random_strict_case(rng)
    ext = embed(strict)
    res = strictify(pb, ext, eps)
    assert np.all(res.process.omega0 >= eps - 1e-12)
    for w in res.process.omega:
        assert pb.cone.contains(w, 1e-9)
    assert res.control_distance <= 2 * eps + 1e-12


def test_strict_process_graph_distance_is_zero_for_itself():
    pb = make_problem("example-4.2")
    t = np.linspace(0, 1, 5)
    p = integrate_strict(pb, t, np.zeros((5, 2)), np.zeros((4, 1)), [0.0, 0.0, 0.0])
    assert isinstance(p, StrictProcess)
    assert d_infty(strict_graph(p), strict_graph(p)) == 0.0
    assert d_infty(extended_graph(embed(p)), extended_graph(embed(p))) == 0.0

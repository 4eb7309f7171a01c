import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from impgap.fields import Poly
from impgap.fixtures import make_problem
from impgap.geometry import (
    Ball,
    Box,
    ConeHull,
    ConeSpec,
    ConstraintFunction,
    HalfSpace,
    Intersection,
    NonTransversalError,
    PointNotInSetError,
    Product,
    Singleton,
    cone_intersection_empty,
    cone_project_component,
    hull_distance,
    hybrid_subdiff,
    normal_cone,
    reachable_gradients,
    set_from_json,
)
from oracles import (
    cone_agrees,
    in_convex_hull,
    proximal_inequality_constant,
    random_boundary_case,
    random_kinked_constraint,
    sampled_limiting_gradients,
)

E1 = np.array([1.0, 0.0, 0.0])


def same_cone(a: ConeHull, b: ConeHull, rng, trials=200) -> bool:
    """Equal cones have equal projections of every vector."""
    for _ in range(trials):
        v = rng.standard_normal(a.dim)
        if np.linalg.norm(a.nearest(v) - b.nearest(v)) > 1e-9:
            return False
    return True


# ---------------------------------------------------------------------------
# normal cones
# ---------------------------------------------------------------------------


def test_box_interior_normal_is_zero():
    assert normal_cone(Box([-1, -1, -1], [1, 1, 1]), [0, 0, 0]).is_zero


def test_halfspace_normal_is_ray():
    cone = normal_cone(HalfSpace(E1, 1.0), E1)
    assert same_cone(cone, ConeHull.ray(E1), np.random.default_rng(0))


def test_initial_set_of_first_example_has_ray_normal():
    initial = Intersection((Ball(E1, 1 / 3), HalfSpace(E1, 1.0)), transversal=True)
    cone = normal_cone(initial, E1)
    assert same_cone(cone, ConeHull.ray(E1), np.random.default_rng(1))
    # brute force: proximal inequality with M = 0 over a grid of members
    g = np.linspace(-1 / 3, 1 / 3, 21)
    pts = np.array([[1 + a, b, c] for a in g for b in g for c in g])
    members = pts[[initial.contains(p, 0.0) for p in pts]]
    assert proximal_inequality_constant(E1, E1, members) == 0.0
    assert proximal_inequality_constant(np.array([0.0, 1.0, 0.0]), E1, members) > 0.0


def test_box_corner_normal_matches_orthant():
    final = Box([-1.0, 0.0, 0.0], [0.0, 1.0, 1.0])
    cone = normal_cone(final, [0.0, 0.0, 0.0])
    expected = ConeHull(3, np.array([[1.0, 0, 0], [0, -1.0, 0], [0, 0, -1.0]]))
    assert same_cone(cone, expected, np.random.default_rng(2))


def test_normal_cone_rejects_outside_point():
    with pytest.raises(PointNotInSetError):
        normal_cone(Box([0, 0], [1, 1]), [2.0, 0.5])


def test_intersection_requires_transversality_flag():
    s = Intersection((HalfSpace([1.0, 0.0], 0.0), HalfSpace([0.0, 1.0], 0.0)))
    with pytest.raises(NonTransversalError):
        normal_cone(s, [0.0, 0.0])
    # one active part needs no flag
    assert not normal_cone(s, [0.0, -1.0]).is_zero


def test_normal_cones_match_proximal_sampling():
    rng = np.random.default_rng(123)
    for _ in range(40):
        s, proj, z = random_boundary_case(rng)
        ok, worst = cone_agrees(normal_cone(s, z), proj, z, rng)
        assert ok, (type(s).__name__, worst)


def test_proximal_inequality_holds_for_generators():
    rng = np.random.default_rng(5)
    for _ in range(20):
        s, proj, z = random_boundary_case(rng)
        cone = normal_cone(s, z)
        cloud = z + 0.5 * rng.standard_normal((4000, z.size))
        members = np.array([proj(p) for p in cloud])
        for g in np.vstack([cone.generators, cone.lineality, -cone.lineality]):
            assert np.isfinite(proximal_inequality_constant(g, z, members))
            if isinstance(s, (Box, HalfSpace)):
                assert proximal_inequality_constant(g, z, members) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_projection_is_member_and_distance(seed):
    rng = np.random.default_rng(seed)
    s, _, _ = random_boundary_case(rng)
    z = 3 * rng.standard_normal(s.dim)
    p = s.project(z)
    assert s.contains(p, 1e-9)
    assert abs(np.linalg.norm(z - p) - s.distance(z)) <= 1e-12


def test_set_json_round_trip_and_unknown_keys():
    s = Product((Singleton([0.0]), Intersection((Ball(E1, 1 / 3), HalfSpace(E1, 1.0)), True), Box([-1, 0], [0, None])))
    again = set_from_json(s.to_json())
    assert again.to_json() == s.to_json()
    with pytest.raises(ValueError, match="unknown keys"):
        set_from_json({"ball": {"center": [0.0], "radius": 1.0, "colour": "red"}})
    with pytest.raises(ValueError, match="unknown set tag"):
        set_from_json({"sphere": {}})


# ---------------------------------------------------------------------------
# cones
# ---------------------------------------------------------------------------


def test_cone_intersection_examples():
    e1 = np.array([1.0, 0.0])
    assert cone_intersection_empty(ConeHull.ray(e1), ConeHull.ray(-e1))
    assert not cone_intersection_empty(ConeHull.ray(e1), ConeHull.full(2))
    # condition data of the second example: {(0, e1)} against R x (-inf, 0] e1
    a = ConeHull.ray([0.0, 1.0, 0.0, 0.0])
    b = ConeHull(4, generators=[[0.0, -1.0, 0.0, 0.0]], lineality=[[1.0, 0.0, 0.0, 0.0]])
    assert cone_intersection_empty(a, b)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_cone_intersection_symmetric_and_detects_shared_generators(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 4))
    a = ConeHull(d, rng.standard_normal((rng.integers(1, 3), d)))
    b = ConeHull(d, rng.standard_normal((rng.integers(1, 3), d)))
    assert cone_intersection_empty(a, b) == cone_intersection_empty(b, a)
    shared = ConeHull(d, np.vstack([b.generators, a.generators[:1]]))
    assert not cone_intersection_empty(a, shared)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_cone_closed_under_scaling_and_addition(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 5))
    c = ConeHull(d, rng.standard_normal((rng.integers(1, 4), d)), rng.standard_normal((rng.integers(0, 2), d)))
    rows = c.spanning_rows()
    x = rng.random(rows.shape[0]) @ rows
    y = rng.random(rows.shape[0]) @ rows
    assert c.contains(3.7 * x, 1e-7) and c.contains(x + y, 1e-7)


def test_pointedness_flag():
    assert ConeHull(2, [[1.0, 0.0], [0.0, 1.0]]).is_pointed()
    assert not ConeHull(2, [[1.0, 0.0], [-1.0, 0.0]]).is_pointed()
    assert not ConeHull.full(2).is_pointed()
    assert ConeSpec.orthant(2).pointed and not ConeSpec.full(2).pointed


def test_cone_projection_examples():
    K1 = ConeHull(2, [[1.0, 1.0]])
    big = ConeHull(5, generators=np.hstack([np.zeros((1, 1)), K1.generators, np.zeros((1, 2))]), lineality=[[1.0, 0, 0, 0, 0]])
    proj = cone_project_component(big, slice(0, 3))
    expected = ConeHull(3, generators=[[0.0, 1.0, 1.0]], lineality=[[1.0, 0.0, 0.0]])
    assert same_cone(proj, expected, np.random.default_rng(3))
    assert cone_project_component(ConeHull.zero(4), slice(0, 2)).is_zero


def test_target_cone_projection_of_second_example():
    pb = make_problem("example-4.2")
    endpoint = np.concatenate([[0.0], E1, [1.0], [0.0, 0.0, 0.0]])
    cone = pb.target.normal_cone(endpoint).project(slice(4, 8))
    expected = ConeHull(4, generators=[[0, 1.0, 0, 0], [0, 0, -1.0, 0], [0, 0, 0, -1.0]], lineality=[[1.0, 0, 0, 0]])
    assert same_cone(cone, expected, np.random.default_rng(4))


# ---------------------------------------------------------------------------
# constraint functions
# ---------------------------------------------------------------------------


def _x(j, coef=1.0):
    return Poly.variable(4, j, coef)


def test_smooth_hybrid_is_gradient():
    h = ConstraintFunction.smooth(_x(1) - 1.0)
    g = hybrid_subdiff(h, [0.0, 1.0, 0.0, 0.0])
    np.testing.assert_allclose(g.points, [[0.0, 1.0, 0.0, 0.0]])
    assert hybrid_subdiff(h, [0.0, 0.5, 0.0, 0.0]).empty


def test_max_hybrid_keeps_single_active_piece():
    h = ConstraintFunction.max_of([_x(1) - 1.0, -_x(1) - 1.0])
    g = hybrid_subdiff(h, [0.0, 1.0, 0.0, 0.0])
    np.testing.assert_allclose(g.points, [[0.0, 1.0, 0.0, 0.0]])


def test_reachable_gradient_examples():
    abs_x = ConstraintFunction.max_of([_x(1), -_x(1)])
    got = reachable_gradients(abs_x, np.zeros(4))
    np.testing.assert_allclose(sorted(got[:, 1]), [-1.0, 1.0])
    face = ConstraintFunction.smooth(_x(1) - _x(0) - 1.0)
    np.testing.assert_allclose(reachable_gradients(face, [0.0, 1.0, 0, 0]), [[-1.0, 1.0, 0.0, 0.0]])
    smooth = ConstraintFunction.smooth(_x(1) * _x(2))
    np.testing.assert_allclose(reachable_gradients(smooth, [0.0, 2.0, 3.0, 0.0]), [[0.0, 3.0, 2.0, 0.0]])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_hybrid_inside_hull_of_limiting_gradients(seed):
    rng = np.random.default_rng(seed)
    h, z = random_kinked_constraint(rng)
    hyb = hybrid_subdiff(h, z)
    lim = sampled_limiting_gradients(h, z, rng)
    for g in hyb.points:
        assert in_convex_hull(lim, g, 1e-5)
    # the library's own hull check agrees with the reachable set
    for g in hyb.points:
        assert hull_distance(reachable_gradients(h, z), g) <= 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_time_independent_hybrid_has_zero_time_component(seed):
    rng = np.random.default_rng(seed)
    h, z = random_kinked_constraint(rng, time_free=True)
    pts = hybrid_subdiff(h, z).points
    assert np.all(pts[:, 0] == 0.0)


def test_constraint_value_is_piecewise_max():
    rng = np.random.default_rng(9)
    h, _ = random_kinked_constraint(rng)
    pts = rng.standard_normal((50, 4))
    np.testing.assert_allclose(h(pts), np.max([p(pts) for p in h.pieces], axis=0))

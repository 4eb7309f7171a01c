"""Independent oracles used by the geometry tests and the acceptance suite.

Nothing here calls into the package's projection or cone code: the
projections are re-derived in closed form and the proximal normals and
limiting gradients are sampled by brute force.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import linprog

from impgap.fields import Poly
from impgap.geometry import Ball, Box, ConstraintFunction, HalfSpace, Product

# ---------------------------------------------------------------------------
# random catalog sets with independent projectors
# ---------------------------------------------------------------------------


def _proj_box(lo, hi):
    return lambda z: np.minimum(np.maximum(z, lo), hi)


def _proj_ball(c, r):
    def proj(z):
        d = z - c
        n = np.linalg.norm(d)
        return z.copy() if n <= r else c + r * d / n

    return proj


def _proj_halfspace(a, b):
    def proj(z):
        excess = a @ z - b
        return z.copy() if excess <= 0 else z - excess * a / (a @ a)

    return proj


def random_box(rng, dim):
    lo = rng.uniform(-2, 0, dim)
    hi = lo + rng.uniform(0.5, 2, dim)
    z = rng.uniform(lo, hi)
    k = rng.integers(1, dim + 1)
    for i in rng.choice(dim, size=k, replace=False):
        z[i] = lo[i] if rng.random() < 0.5 else hi[i]
    return Box(lo, hi), _proj_box(lo, hi), z


def random_ball(rng, dim):
    c = rng.uniform(-1, 1, dim)
    r = rng.uniform(0.3, 2)
    d = rng.standard_normal(dim)
    z = c + r * d / np.linalg.norm(d)
    return Ball(c, r), _proj_ball(c, r), z


def random_halfspace(rng, dim):
    a = rng.standard_normal(dim)
    b = rng.uniform(-1, 1)
    x = rng.standard_normal(dim)
    z = x - (a @ x - b) * a / (a @ a)
    return HalfSpace(a, b), _proj_halfspace(a, b), z


MAKERS = (random_box, random_ball, random_halfspace)


def random_product(rng):
    """Product of two or three catalog sets, at least one part on its boundary."""
    parts, projs, points, dims = [], [], [], []
    for j in range(rng.integers(2, 4)):
        dim = int(rng.integers(1, 3))
        s, p, z = MAKERS[rng.integers(len(MAKERS))](rng, dim)
        if j > 0 and rng.random() < 0.3 and isinstance(s, Box):
            z = 0.5 * (s.lo + s.hi)  # an interior block
        parts.append(s)
        projs.append(p)
        points.append(z)
        dims.append(dim)
    cuts = np.cumsum([0] + dims)

    def proj(z):
        return np.concatenate([projs[i](z[cuts[i] : cuts[i + 1]]) for i in range(len(parts))])

    return Product(tuple(parts)), proj, np.concatenate(points)


def random_boundary_case(rng):
    kind = rng.integers(4)
    if kind == 3:
        return random_product(rng)
    return MAKERS[kind](rng, int(rng.integers(1, 4)))


# ---------------------------------------------------------------------------
# proximal normals
# ---------------------------------------------------------------------------


def proximal_normal(proj, z, v, t=1e-8):
    """``(y - proj(y)) / t`` for ``y = z + t v``; the normal-cone part of ``v`` for convex sets."""
    y = z + t * v
    return (y - proj(y)) / t


def angle(u, w):
    nu, nw = np.linalg.norm(u), np.linalg.norm(w)
    return float(np.arccos(np.clip(u @ w / (nu * nw), -1.0, 1.0)))


def cone_agrees(cone, proj, z, rng, directions=40, tol=1e-3, zero=1e-6) -> tuple[bool, float]:
    """Compare the cone's nearest point with the sampled proximal normal along random directions.

    The generators themselves are included among the directions.  Returns
    the verdict and the worst angle seen.
    """
    dim = z.size
    vs = [rng.standard_normal(dim) for _ in range(directions)]
    vs += list(cone.generators) + list(cone.lineality) + list(-cone.lineality)
    worst = 0.0
    for v in vs:
        n = proximal_normal(proj, z, v)
        c = cone.nearest(v)
        small_n, small_c = np.linalg.norm(n) <= zero, np.linalg.norm(c) <= zero
        if small_n and small_c:
            continue
        if small_n != small_c:
            return False, float("inf")
        worst = max(worst, angle(n, c))
    return worst <= tol, worst


def proximal_inequality_constant(g, z, members) -> float:
    """Smallest ``M`` with ``g . (x - z) <= M |x - z|^2`` over the sampled members."""
    d = members - z
    sq = np.einsum("ij,ij->i", d, d)
    keep = sq > 1e-24
    ratio = (d[keep] @ g) / sq[keep]
    return float(max(ratio.max(initial=0.0), 0.0))


# ---------------------------------------------------------------------------
# limiting gradients of max-of-smooth functions
# ---------------------------------------------------------------------------


def sampled_limiting_gradients(h, z, rng, radius=1e-6, samples=400) -> np.ndarray:
    """Gradients of the unique maximal piece at random nearby points."""
    pts = z + radius * rng.standard_normal((samples, z.size))
    vals = h.piece_values(pts)
    order = np.sort(vals, axis=1)
    unique = order[:, -1] > (order[:, -2] if vals.shape[1] > 1 else -np.inf)
    idx = np.argmax(vals, axis=1)
    grads = h.piece_gradients(pts)
    out = grads[np.arange(samples), idx][unique]
    return np.unique(np.round(out, 6), axis=0)


def random_kinked_constraint(rng, dim=4, time_free=False):
    """Max of affine and quadratic pieces, with several pieces active (value 0) at a random point."""
    z = rng.standard_normal(dim)
    pieces = []
    n_pieces = int(rng.integers(2, 5))
    n_active = int(rng.integers(1, n_pieces + 1))
    for k in range(n_pieces):
        lin = rng.standard_normal(dim)
        if time_free:
            lin[0] = 0.0
        p = Poly.affine(dim, 0.0, lin)
        if rng.random() < 0.5:
            j = int(rng.integers(1, dim))
            p = p + Poly.variable(dim, j) * Poly.variable(dim, j) * float(rng.uniform(-1, 1))
        shift = float(p(z)) + (0.0 if k < n_active else rng.uniform(0.1, 1.0))
        pieces.append(p - shift)
    return ConstraintFunction.max_of(pieces), z


def in_convex_hull(points: np.ndarray, v: np.ndarray, tol: float) -> bool:
    """LP feasibility of ``v = sum l_k points_k`` within ``tol`` (sup-norm), ``l`` in the simplex."""
    k, d = points.shape
    # variables: l (k), slack s; minimise s subject to |P^T l - v| <= s
    c = np.zeros(k + 1)
    c[-1] = 1.0
    A = np.vstack([np.hstack([points.T, -np.ones((d, 1))]), np.hstack([-points.T, -np.ones((d, 1))])])
    b = np.concatenate([v, -v])
    A_eq = np.concatenate([np.ones(k), [0.0]])[None, :]
    res = linprog(c, A_ub=A, b_ub=b, A_eq=A_eq, b_eq=[1.0], bounds=[(0, None)] * (k + 1), method="highs")
    return res.status == 0 and res.fun <= tol


# ---------------------------------------------------------------------------
# random strict processes
# ---------------------------------------------------------------------------


def random_cone_json(rng, m):
    kind = rng.integers(4)
    if kind == 0:
        return {"full": m}
    if kind == 1:
        return {"orthant": m}
    if kind == 2:
        return {"ray": rng.standard_normal(m).tolist()}
    return {"generators": rng.standard_normal((int(rng.integers(1, 4)), m)).tolist()}


def random_strict_case(rng):
    """A fixture problem with a random catalog cone and a strict process driven by it.

    ``u`` is piecewise linear on a uniform time grid with ``du/dt`` in the
    cone (zero on some cells).  Returns ``(problem, strict_process)``.
    """
    from impgap.fixtures import make_problem
    from impgap.model import ProblemSpec, integrate_strict

    data = make_problem("example-4.2").to_json()
    data["cone"] = random_cone_json(rng, 2)
    data["K"] = "inf"
    problem = ProblemSpec.from_json(data)
    gens = problem.cone.hull().spanning_rows()
    M = int(rng.integers(2, 60))
    t1 = float(rng.uniform(-1, 1))
    t = np.linspace(t1, t1 + rng.uniform(0.2, 3), M + 1)
    coef = rng.exponential(1.0, (M, gens.shape[0])) * (rng.random((M, 1)) < 0.8)
    du = coef @ gens * rng.uniform(0, 3)
    u = np.vstack([np.zeros(2), np.cumsum(du * np.diff(t)[:, None], axis=0)]) + rng.standard_normal(2)
    x0 = rng.uniform(-0.5, 0.5, 3)
    return problem, integrate_strict(problem, t, u, np.zeros((M, 1)), x0)


def strict_cost(problem, proc) -> float:
    e = np.concatenate([[proc.t1], proc.x[0], [proc.t2], proc.x[-1], [proc.v[-1]]])
    return float(problem.cost(e))

"""Sets, cones and constraint functions with exact convex-analysis oracles.

The catalog is closed: boxes, balls, half-spaces, singletons, polyhedra,
cartesian products and finite intersections.  Every member is convex, so its
limiting normal cone is the convex normal cone and has a closed form.  Cones
are carried as finitely generated objects (:class:`ConeHull`) so that every
"does this intersection contain a nonzero vector" question is a small LP.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linprog, nnls

from .fields import Poly

LOGGER = logging.getLogger(__name__)

__all__ = [
    "GeometryError",
    "PointNotInSetError",
    "NonTransversalError",
    "ConeHull",
    "GradientSet",
    "SetSpec",
    "Box",
    "Ball",
    "HalfSpace",
    "Singleton",
    "Polyhedron",
    "Product",
    "Intersection",
    "ConeSpec",
    "ConstraintFunction",
    "normal_cone",
    "hybrid_subdiff",
    "reachable_gradients",
    "cone_project_component",
    "cone_intersection_empty",
    "cone_meet_witness",
    "hull_cone_distance",
    "hull_distance",
    "set_from_json",
]

ACTIVE_TOL = 1e-8
MEMBER_TOL = 1e-6


class GeometryError(RuntimeError):
    """Base class for refusals of the geometry oracles."""


class PointNotInSetError(GeometryError):
    pass


class NonTransversalError(GeometryError):
    pass


def _unit_rows(rows: np.ndarray, eps: float = 1e-14) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.size == 0:
        return rows.reshape(0, rows.shape[-1] if rows.ndim == 2 else 0)
    norms = np.linalg.norm(rows, axis=1)
    keep = norms > eps
    return rows[keep] / norms[keep, None]


# ---------------------------------------------------------------------------
# cones
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConeHull:
    """Finitely generated convex cone ``{sum c_k g_k : c_k >= 0} + span(L)``.

    Generators and lineality rows are stored as unit vectors.  The zero cone
    has no rows at all.
    """

    dim: int
    generators: np.ndarray = field(default=None)  # type: ignore[assignment]
    lineality: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        gens = np.zeros((0, self.dim)) if self.generators is None else self.generators
        lin = np.zeros((0, self.dim)) if self.lineality is None else self.lineality
        gens = _unit_rows(np.asarray(gens, dtype=float).reshape(-1, self.dim))
        lin = _unit_rows(np.asarray(lin, dtype=float).reshape(-1, self.dim))
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "lineality", lin)

    @classmethod
    def zero(cls, dim: int) -> "ConeHull":
        return cls(dim)

    @classmethod
    def full(cls, dim: int) -> "ConeHull":
        return cls(dim, lineality=np.eye(dim))

    @classmethod
    def ray(cls, direction: Sequence[float]) -> "ConeHull":
        d = np.asarray(direction, dtype=float)
        return cls(d.size, generators=d[None, :])

    @property
    def is_zero(self) -> bool:
        return self.generators.shape[0] == 0 and self.lineality.shape[0] == 0

    def spanning_rows(self) -> np.ndarray:
        """Generators with each lineality row split into a +/- pair."""
        return np.vstack([self.generators, self.lineality, -self.lineality])

    def __add__(self, other: "ConeHull | None") -> "ConeHull":
        if other is None:
            return self
        if other.dim != self.dim:
            raise ValueError("cone dimensions differ")
        return ConeHull(
            self.dim,
            np.vstack([self.generators, other.generators]),
            np.vstack([self.lineality, other.lineality]),
        )

    __radd__ = __add__

    def __neg__(self) -> "ConeHull":
        return ConeHull(self.dim, -self.generators, self.lineality)

    def nearest(self, v: Sequence[float]) -> np.ndarray:
        """Euclidean projection of ``v`` onto the cone."""
        v = np.asarray(v, dtype=float)
        rows = self.spanning_rows()
        if rows.shape[0] == 0:
            return np.zeros_like(v)
        coef, _ = nnls(rows.T, v)
        return rows.T @ coef

    def distance(self, v: Sequence[float]) -> float:
        v = np.asarray(v, dtype=float)
        return float(np.linalg.norm(v - self.nearest(v)))

    def contains(self, v: Sequence[float], tol: float = 1e-9) -> bool:
        v = np.asarray(v, dtype=float)
        return self.distance(v) <= tol * max(1.0, float(np.linalg.norm(v)))

    def angle_to(self, v: Sequence[float]) -> float:
        """Angle between ``v`` and its projection onto the cone (``pi/2`` if that is zero)."""
        v = np.asarray(v, dtype=float)
        nv = np.linalg.norm(v)
        if nv == 0:
            return 0.0
        w = self.nearest(v)
        nw = np.linalg.norm(w)
        if nw <= 1e-15 * nv:
            return float(np.pi / 2)
        return float(np.arccos(np.clip(v @ w / (nv * nw), -1.0, 1.0)))

    def project(self, block) -> "ConeHull":
        idx = np.arange(self.dim)[block]
        return ConeHull(idx.size, self.generators[:, idx], self.lineality[:, idx])

    def is_pointed(self, tol: float = 1e-9) -> bool:
        if self.lineality.shape[0]:
            return False
        return cone_intersection_empty(self, -self, exclude_zero=True, tol=tol)

    def to_json(self) -> dict:
        return {"dim": self.dim, "generators": self.generators.tolist(), "lineality": self.lineality.tolist()}


@dataclass(frozen=True, eq=False)
class GradientSet:
    """Finite set of gradient vectors whose convex hull is the subdifferential.

    ``degenerate`` flags a vanishing gradient at an active point, in which
    case downstream condition checks must report "inconclusive".
    """

    points: np.ndarray
    degenerate: bool = False

    @property
    def empty(self) -> bool:
        return self.points.shape[0] == 0

    def cone(self) -> ConeHull:
        return ConeHull(self.points.shape[1], self.points)


def _linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None):
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    return res


def cone_meet_witness(a: ConeHull, b: ConeHull, tol: float = 1e-9) -> np.ndarray | None:
    """A nonzero vector of ``a`` ∩ ``b`` with sup-norm one, or ``None``.

    Decided by ``2 * dim`` LPs that maximise ``±x_i`` over the intersection
    intersected with the unit sup-norm box.
    """
    if a.dim != b.dim:
        raise ValueError("cone dimensions differ")
    d = a.dim
    Ra, Rb = a.spanning_rows(), b.spanning_rows()
    ka, kb = Ra.shape[0], Rb.shape[0]
    if ka == 0 or kb == 0:
        return None
    nvar = ka + kb
    A_eq = np.hstack([Ra.T, -Rb.T])
    b_eq = np.zeros(d)
    A_ub = np.vstack([np.hstack([Ra.T, np.zeros((d, kb))]), np.hstack([-Ra.T, np.zeros((d, kb))])])
    b_ub = np.ones(2 * d)
    bounds = [(0, None)] * nvar
    for i in range(d):
        for sign in (1.0, -1.0):
            c = np.zeros(nvar)
            c[:ka] = -sign * Ra[:, i]
            res = _linprog(c, A_ub, b_ub, A_eq, b_eq, bounds)
            if res.status == 0 and -res.fun > tol:
                x = Ra.T @ res.x[:ka]
                return x / np.max(np.abs(x))
    return None


def cone_intersection_empty(a: ConeHull | None, b: ConeHull | None, exclude_zero: bool = True, tol: float = 1e-9) -> bool:
    """Whether two cones share no nonzero element (or no element at all).

    ``None`` stands for the empty set.  Cones always share the origin, so with
    ``exclude_zero=False`` the answer is ``True`` only when an argument is
    empty.
    """
    if a is None or b is None:
        return True
    if not exclude_zero:
        return False
    return cone_meet_witness(a, b, tol) is None


def hull_cone_distance(points: np.ndarray, cone: ConeHull) -> tuple[float, np.ndarray]:
    """Sup-norm distance between ``co(points)`` and ``cone`` and the hull point attaining it."""
    P = np.atleast_2d(points)
    k, d = P.shape
    R = cone.spanning_rows()
    r = R.shape[0]
    # variables: lambda (k), cone coefficients (r), t
    nvar = k + r + 1
    c = np.zeros(nvar)
    c[-1] = 1.0
    D = np.hstack([P.T, -R.T]) if r else P.T
    ones = np.ones((d, 1))
    A_ub = np.vstack([np.hstack([D, -ones]), np.hstack([-D, -ones])])
    b_ub = np.zeros(2 * d)
    A_eq = np.zeros((1, nvar))
    A_eq[0, :k] = 1.0
    bounds = [(0, None)] * (k + r) + [(0, None)]
    res = _linprog(c, A_ub, b_ub, A_eq, np.ones(1), bounds)
    if res.status != 0:
        raise GeometryError(f"hull/cone distance LP failed: {res.message}")
    return float(res.fun), P.T @ res.x[:k]


def hull_distance(points: np.ndarray, v: Sequence[float]) -> float:
    """Sup-norm distance from ``v`` to the convex hull of ``points``."""
    P = np.atleast_2d(points)
    if P.shape[0] == 0:
        return float("inf")
    shifted = P - np.asarray(v, dtype=float)
    return hull_cone_distance(shifted, ConeHull.zero(P.shape[1]))[0]


# ---------------------------------------------------------------------------
# sets
# ---------------------------------------------------------------------------


def _embed_poly(p: Poly, offset: int, total: int) -> Poly:
    terms = []
    for c, e in p.terms:
        row = [0] * total
        row[offset:offset + len(e)] = e
        terms.append((c, row))
    return Poly(total, terms)


class SetSpec:
    """Closed convex set from the catalog."""

    dim: int

    def contains(self, z, tol: float = MEMBER_TOL) -> bool:
        return self.distance(z) <= tol

    def project(self, z) -> np.ndarray:
        raise NotImplementedError

    def distance(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return float(np.linalg.norm(z - self.project(z)))

    def normal_cone(self, z, tol: float = ACTIVE_TOL) -> ConeHull:
        z = np.asarray(z, dtype=float)
        dist = self.distance(z)
        if dist > max(tol, MEMBER_TOL):
            raise PointNotInSetError(f"point at distance {dist:.3e} from {type(self).__name__}")
        return self._normal(z, tol)

    def _normal(self, z: np.ndarray, tol: float) -> ConeHull:
        raise NotImplementedError

    def smooth_constraints(self) -> list[tuple[str, Poly]]:
        """Polynomial description as ``("ineq", g)`` (g <= 0) and ``("eq", g)`` rows."""
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


def _opt(values) -> list:
    return [None if not np.isfinite(v) else float(v) for v in values]


@dataclass(frozen=True, eq=False)
class Box(SetSpec):
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).ravel()
        hi = np.asarray(self.hi, dtype=float).ravel()
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("box bounds must satisfy lo <= hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    def project(self, z) -> np.ndarray:
        return np.clip(np.asarray(z, dtype=float), self.lo, self.hi)

    def _normal(self, z, tol):
        gens, lin = [], []
        for i in range(self.dim):
            at_lo = abs(z[i] - self.lo[i]) <= tol
            at_hi = abs(z[i] - self.hi[i]) <= tol
            e = np.zeros(self.dim)
            e[i] = 1.0
            if at_lo and at_hi:
                lin.append(e)
            elif at_lo:
                gens.append(-e)
            elif at_hi:
                gens.append(e)
        return ConeHull(self.dim, np.array(gens).reshape(-1, self.dim), np.array(lin).reshape(-1, self.dim))

    def smooth_constraints(self):
        rows = []
        for i in range(self.dim):
            xi = Poly.variable(self.dim, i)
            if self.lo[i] == self.hi[i]:
                rows.append(("eq", xi - self.lo[i]))
                continue
            if np.isfinite(self.hi[i]):
                rows.append(("ineq", xi - self.hi[i]))
            if np.isfinite(self.lo[i]):
                rows.append(("ineq", self.lo[i] - xi))
        return rows

    def to_json(self):
        return {"box": {"lo": _opt(self.lo), "hi": _opt(self.hi)}}


@dataclass(frozen=True, eq=False)
class Ball(SetSpec):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).ravel())
        if self.radius < 0:
            raise ValueError("negative radius")

    @property
    def dim(self) -> int:
        return self.center.size

    def project(self, z):
        z = np.asarray(z, dtype=float)
        d = z - self.center
        r = np.linalg.norm(d)
        if r <= self.radius:
            return z.copy()
        return self.center + d * (self.radius / r)

    def _normal(self, z, tol):
        if self.radius == 0:
            return ConeHull.full(self.dim)
        d = z - self.center
        r = np.linalg.norm(d)
        if abs(r - self.radius) <= tol:
            return ConeHull.ray(d)
        return ConeHull.zero(self.dim)

    def smooth_constraints(self):
        g = Poly.constant(self.dim, -self.radius**2)
        for i in range(self.dim):
            xi = Poly.variable(self.dim, i) - self.center[i]
            g = g + xi * xi
        return [("ineq", g)]

    def to_json(self):
        return {"ball": {"center": self.center.tolist(), "radius": float(self.radius)}}


@dataclass(frozen=True, eq=False)
class HalfSpace(SetSpec):
    """``{x : normal . x <= offset}``."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        a = np.asarray(self.normal, dtype=float).ravel()
        if not np.any(a):
            raise ValueError("half-space normal must be nonzero")
        object.__setattr__(self, "normal", a)

    @property
    def dim(self) -> int:
        return self.normal.size

    def project(self, z):
        z = np.asarray(z, dtype=float)
        excess = self.normal @ z - self.offset
        if excess <= 0:
            return z.copy()
        return z - excess / (self.normal @ self.normal) * self.normal

    def _normal(self, z, tol):
        if self.normal @ z - self.offset >= -tol * np.linalg.norm(self.normal):
            return ConeHull.ray(self.normal)
        return ConeHull.zero(self.dim)

    def smooth_constraints(self):
        return [("ineq", Poly.affine(self.dim, -self.offset, self.normal))]

    def to_json(self):
        return {"halfspace": {"normal": self.normal.tolist(), "offset": float(self.offset)}}


@dataclass(frozen=True, eq=False)
class Singleton(SetSpec):
    point: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float).ravel())

    @property
    def dim(self) -> int:
        return self.point.size

    def project(self, z):
        return self.point.copy()

    def _normal(self, z, tol):
        return ConeHull.full(self.dim)

    def smooth_constraints(self):
        return [("eq", Poly.variable(self.dim, i) - self.point[i]) for i in range(self.dim)]

    def to_json(self):
        return {"point": self.point.tolist()}


def _dykstra(parts: Sequence[SetSpec], z: np.ndarray, maxit: int = 20000, tol: float = 1e-14) -> np.ndarray:
    x = np.asarray(z, dtype=float).copy()
    incr = [np.zeros_like(x) for _ in parts]
    for _ in range(maxit):
        prev = x.copy()
        for i, s in enumerate(parts):
            y = s.project(x + incr[i])
            incr[i] = x + incr[i] - y
            x = y
        if np.linalg.norm(x - prev) <= tol * max(1.0, np.linalg.norm(x)):
            break
    return x


@dataclass(frozen=True, eq=False)
class Polyhedron(SetSpec):
    """``{x : A x <= b}``."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        if A.shape[0] != b.size:
            raise ValueError("polyhedron rows and offsets disagree")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        res = _linprog(np.zeros(A.shape[1]), A, b, bounds=[(None, None)] * A.shape[1])
        if res.status == 2:
            raise ValueError("empty polyhedron")

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def _halfspaces(self):
        return [HalfSpace(a, bi) for a, bi in zip(self.A, self.b)]

    def project(self, z):
        z = np.asarray(z, dtype=float)
        if np.all(self.A @ z <= self.b):
            return z.copy()
        return _dykstra(self._halfspaces(), z)

    def contains(self, z, tol: float = MEMBER_TOL) -> bool:
        z = np.asarray(z, dtype=float)
        norms = np.linalg.norm(self.A, axis=1)
        return bool(np.all(self.A @ z - self.b <= tol * norms))

    def _normal(self, z, tol):
        norms = np.linalg.norm(self.A, axis=1)
        active = self.A @ z - self.b >= -tol * norms
        return ConeHull(self.dim, self.A[active])

    def smooth_constraints(self):
        return [("ineq", Poly.affine(self.dim, -bi, a)) for a, bi in zip(self.A, self.b)]

    def to_json(self):
        return {"polyhedron": {"A": self.A.tolist(), "b": self.b.tolist()}}


@dataclass(frozen=True, eq=False)
class Product(SetSpec):
    parts: tuple

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))

    @property
    def dim(self) -> int:
        return sum(p.dim for p in self.parts)

    def _slices(self):
        start = 0
        for p in self.parts:
            yield p, slice(start, start + p.dim)
            start += p.dim

    def project(self, z):
        z = np.asarray(z, dtype=float)
        return np.concatenate([p.project(z[sl]) for p, sl in self._slices()])

    def contains(self, z, tol: float = MEMBER_TOL) -> bool:
        z = np.asarray(z, dtype=float)
        return all(p.contains(z[sl], tol) for p, sl in self._slices())

    def _normal(self, z, tol):
        gens, lin = [], []
        for p, sl in self._slices():
            c = p._normal(z[sl], tol)
            g = np.zeros((c.generators.shape[0], self.dim))
            g[:, sl] = c.generators
            l = np.zeros((c.lineality.shape[0], self.dim))
            l[:, sl] = c.lineality
            gens.append(g)
            lin.append(l)
        return ConeHull(self.dim, np.vstack(gens), np.vstack(lin))

    def smooth_constraints(self):
        rows = []
        for p, sl in self._slices():
            rows.extend((kind, _embed_poly(g, sl.start, self.dim)) for kind, g in p.smooth_constraints())
        return rows

    def to_json(self):
        return {"product": [p.to_json() for p in self.parts]}


@dataclass(frozen=True, eq=False)
class Intersection(SetSpec):
    """Finite intersection.  ``transversal`` asserts the normal-cone sum rule."""

    parts: tuple
    transversal: bool = False

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if len({p.dim for p in self.parts}) != 1:
            raise ValueError("intersection parts must share a dimension")

    @property
    def dim(self) -> int:
        return self.parts[0].dim

    def project(self, z):
        z = np.asarray(z, dtype=float)
        if all(p.contains(z, 0.0) for p in self.parts):
            return z.copy()
        return _dykstra(self.parts, z)

    def contains(self, z, tol: float = MEMBER_TOL) -> bool:
        return all(p.contains(z, tol) for p in self.parts)

    def _normal(self, z, tol):
        cones = [p._normal(z, tol) for p in self.parts]
        nonzero = [c for c in cones if not c.is_zero]
        if len(nonzero) > 1 and not self.transversal:
            raise NonTransversalError(
                "several parts of the intersection are active and transversality was not asserted"
            )
        total = ConeHull.zero(self.dim)
        for c in nonzero:
            total = total + c
        return total

    def smooth_constraints(self):
        rows = []
        for p in self.parts:
            rows.extend(p.smooth_constraints())
        return rows

    def to_json(self):
        return {"intersection": {"sets": [p.to_json() for p in self.parts], "transversal": bool(self.transversal)}}


def _floats(values, key: str) -> np.ndarray:
    try:
        return np.array([np.inf if v is None else float(v) for v in values], dtype=float)
    except TypeError as exc:
        raise ValueError(f"{key}: expected a list of numbers") from exc


def set_from_json(data: Mapping, path: str = "set") -> SetSpec:
    """Parse a tagged set description, rejecting unknown tags and keys."""
    if not isinstance(data, Mapping) or len(data) != 1:
        raise ValueError(f"{path}: a set must be a single-key object")
    (tag, body), = data.items()

    def keys(allowed):
        unknown = set(body) - set(allowed)
        if unknown:
            raise ValueError(f"{path}.{tag}: unknown keys {sorted(unknown)}")

    if tag == "box":
        keys({"lo", "hi"})
        lo = _floats(body["lo"], f"{path}.box.lo")
        lo = np.where(np.isinf(lo), -np.inf, lo)
        return Box(lo, _floats(body["hi"], f"{path}.box.hi"))
    if tag == "ball":
        keys({"center", "radius"})
        return Ball(np.asarray(body["center"], dtype=float), float(body["radius"]))
    if tag == "halfspace":
        keys({"normal", "offset"})
        return HalfSpace(np.asarray(body["normal"], dtype=float), float(body["offset"]))
    if tag == "point":
        return Singleton(np.asarray(body, dtype=float))
    if tag == "polyhedron":
        keys({"A", "b"})
        return Polyhedron(np.asarray(body["A"], dtype=float), np.asarray(body["b"], dtype=float))
    if tag == "product":
        return Product(tuple(set_from_json(p, f"{path}.product[{i}]") for i, p in enumerate(body)))
    if tag == "intersection":
        keys({"sets", "transversal"})
        parts = tuple(set_from_json(p, f"{path}.intersection.sets[{i}]") for i, p in enumerate(body["sets"]))
        return Intersection(parts, bool(body.get("transversal", False)))
    raise ValueError(f"{path}: unknown set tag {tag!r}")


def normal_cone(s: SetSpec, point, tol: float = ACTIVE_TOL) -> ConeHull:
    """Normal cone of a catalog set at a member point."""
    return s.normal_cone(point, tol)


# ---------------------------------------------------------------------------
# the control cone
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConeSpec:
    """Closed convex control cone.

    ``kind`` is one of ``full``, ``zero``, ``orthant``, ``ray``, ``generated``.
    """

    kind: str
    dim: int
    generators: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("full", "zero", "orthant", "ray", "generated"):
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.kind in ("ray", "generated"):
            g = _unit_rows(np.asarray(self.generators, dtype=float).reshape(-1, self.dim))
            if g.shape[0] == 0:
                raise ValueError("a generated cone needs a nonzero generator")
            object.__setattr__(self, "generators", g)

    @classmethod
    def full(cls, m: int) -> "ConeSpec":
        return cls("full", m)

    @classmethod
    def orthant(cls, m: int) -> "ConeSpec":
        return cls("orthant", m)

    @classmethod
    def ray(cls, direction) -> "ConeSpec":
        d = np.asarray(direction, dtype=float)
        return cls("ray", d.size, d[None, :])

    @classmethod
    def generated(cls, gens) -> "ConeSpec":
        g = np.atleast_2d(np.asarray(gens, dtype=float))
        return cls("generated", g.shape[1], g)

    def hull(self) -> ConeHull:
        if self.kind == "full":
            return ConeHull.full(self.dim)
        if self.kind == "zero":
            return ConeHull.zero(self.dim)
        if self.kind == "orthant":
            return ConeHull(self.dim, np.eye(self.dim))
        return ConeHull(self.dim, self.generators)

    def param_basis(self) -> tuple[np.ndarray, np.ndarray]:
        """Matrix ``B`` (dim x r) and coefficient lower bounds so that ``B c`` spans the cone."""
        if self.kind == "full":
            return np.eye(self.dim), np.full(self.dim, -np.inf)
        if self.kind == "zero":
            return np.zeros((self.dim, 0)), np.zeros(0)
        if self.kind == "orthant":
            return np.eye(self.dim), np.zeros(self.dim)
        return self.generators.T.copy(), np.zeros(self.generators.shape[0])

    @property
    def pointed(self) -> bool:
        if self.kind == "full":
            return self.dim == 0
        if self.kind == "generated":
            return self.hull().is_pointed()
        return True

    def contains(self, w, tol: float = 1e-9) -> bool:
        w = np.asarray(w, dtype=float)
        if self.kind == "full":
            return True
        if self.kind == "zero":
            return bool(np.linalg.norm(w) <= tol)
        if self.kind == "orthant":
            return bool(np.all(w >= -tol))
        return self.hull().contains(w, tol)

    def unit_samples(self, count: int = 64, seed: int = 0) -> np.ndarray:
        """Deterministic unit vectors of the cone, including its extreme rays."""
        m = self.dim
        if self.kind == "zero" or m == 0:
            return np.zeros((0, m))
        if self.kind == "ray":
            return self.generators.copy()
        rng = np.random.default_rng(seed)
        if self.kind == "generated":
            k = self.generators.shape[0]
            weights = rng.dirichlet(np.ones(k), size=max(count - k, 0))
            pts = np.vstack([self.generators, weights @ self.generators])
            return _unit_rows(pts)
        if m == 1:
            pts = np.array([[1.0], [-1.0]])
        elif m == 2:
            ang = 2 * np.pi * np.arange(count) / count
            pts = np.column_stack([np.cos(ang), np.sin(ang)])
        else:
            axes = np.vstack([np.eye(m), -np.eye(m)])
            pts = np.vstack([axes, rng.standard_normal((max(count - 2 * m, 0), m))])
        if self.kind == "orthant":
            pts = np.abs(pts)
        return np.unique(np.round(_unit_rows(pts), 15), axis=0)

    def to_json(self) -> dict:
        if self.kind in ("full", "zero", "orthant"):
            return {self.kind: self.dim}
        if self.kind == "ray":
            return {"ray": self.generators[0].tolist()}
        return {"generators": self.generators.tolist()}

    @classmethod
    def from_json(cls, data: Mapping, path: str = "cone") -> "ConeSpec":
        if not isinstance(data, Mapping) or len(data) != 1:
            raise ValueError(f"{path}: a cone must be a single-key object")
        (tag, body), = data.items()
        if tag in ("full", "zero", "orthant"):
            return cls(tag, int(body))
        if tag == "ray":
            return cls.ray(body)
        if tag == "generators":
            return cls.generated(body)
        raise ValueError(f"{path}: unknown cone tag {tag!r}")


# ---------------------------------------------------------------------------
# constraint functions and subdifferentials
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConstraintFunction:
    """Pointwise maximum of smooth polynomial pieces in ``(t, x)``.

    A single piece is the smooth case.
    """

    pieces: tuple
    tol: float = ACTIVE_TOL

    def __post_init__(self):
        pieces = tuple(self.pieces)
        if not pieces:
            raise ValueError("a constraint needs at least one piece")
        if len({p.nvars for p in pieces}) != 1:
            raise ValueError("pieces disagree on the variable count")
        object.__setattr__(self, "pieces", pieces)

    @classmethod
    def smooth(cls, poly: Poly, tol: float = ACTIVE_TOL) -> "ConstraintFunction":
        return cls((poly,), tol)

    @classmethod
    def max_of(cls, polys: Sequence[Poly], tol: float = ACTIVE_TOL) -> "ConstraintFunction":
        return cls(tuple(polys), tol)

    @property
    def is_smooth(self) -> bool:
        return len(self.pieces) == 1

    @property
    def nvars(self) -> int:
        return self.pieces[0].nvars

    def piece_values(self, z) -> np.ndarray:
        return np.stack([p(z) for p in self.pieces], axis=-1)

    def __call__(self, z) -> np.ndarray:
        return self.piece_values(z).max(axis=-1)

    def piece_gradients(self, z) -> np.ndarray:
        return np.stack([p.grad(z) for p in self.pieces], axis=-2)

    def depends_on_time(self) -> bool:
        return any(p.depends_on(0) for p in self.pieces)

    def to_json(self) -> dict:
        if self.is_smooth:
            return {"smooth": self.pieces[0].to_json()}
        return {"max": [p.to_json() for p in self.pieces]}

    @classmethod
    def from_json(cls, nvars: int, data: Mapping, tol: float = ACTIVE_TOL, path: str = "constraint") -> "ConstraintFunction":
        if not isinstance(data, Mapping) or len(data) != 1:
            raise ValueError(f"{path}: a constraint must be a single-key object")
        (tag, body), = data.items()
        if tag == "smooth":
            return cls.smooth(Poly.from_json(nvars, body), tol)
        if tag == "max":
            return cls.max_of([Poly.from_json(nvars, b) for b in body], tol)
        raise ValueError(f"{path}: unknown constraint tag {tag!r}")


def reachable_gradients(h: ConstraintFunction, point) -> np.ndarray:
    """Gradients of every piece attaining the max within the activity tolerance."""
    z = np.asarray(point, dtype=float)
    vals = h.piece_values(z)
    grads = h.piece_gradients(z)
    active = vals >= vals.max() - h.tol
    return grads[active]


def hybrid_subdiff(h: ConstraintFunction, point, radius: float = 1e-4, samples: int = 32, seed: int = 0) -> GradientSet:
    """Generators of the hybrid subdifferential at ``point``.

    Empty when ``h`` is below ``-tol``.  For several pieces, a piece counts
    when it is the maximiser at some sampled nearby point where ``h > 0``;
    samples lie on a sphere of the given radius around the point, in random
    directions and along the active gradients.
    """
    z = np.asarray(point, dtype=float)
    d = z.size
    vals = h.piece_values(z)
    value = vals.max()
    if value < -h.tol:
        return GradientSet(np.zeros((0, d)))
    grads = h.piece_gradients(z)
    active = np.flatnonzero(vals >= value - h.tol)
    vanishing = bool(np.any(np.linalg.norm(grads[active], axis=1) <= 1e-12))
    if h.is_smooth:
        return GradientSet(grads[active], degenerate=vanishing)
    rng = np.random.default_rng(seed)
    dirs = np.vstack([rng.standard_normal((samples, d)), grads[active], -grads[active]])
    dirs = _unit_rows(dirs)
    pts = z + radius * dirs
    pv = h.piece_values(pts)[:, active]
    positive = pv.max(axis=1) > 0
    if not np.any(positive):
        return GradientSet(np.zeros((0, d)), degenerate=True)
    winners = np.unique(np.argmax(pv[positive], axis=1))
    chosen = grads[active[winners]]
    return GradientSet(chosen, degenerate=vanishing)


def cone_project_component(c: ConeHull, block) -> ConeHull:
    """Projection of a cone onto a coordinate block."""
    return c.project(block)

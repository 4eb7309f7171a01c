"""Built-in example problems with their reference minimizers and multipliers.

All three share the state dimension 3, two impulse fields
``g1 = (1, 0, 0)`` and ``g2 = (0, -1, -x1)``, drift ``f = (0, x2 x3, 0)``,
the cost ``-x1`` at the final point, the variation bound ``K = 2`` and the
full control cone.  They differ in the state constraints and targets.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import Poly, PolyMap
from .geometry import Ball, Box, ConeSpec, ConstraintFunction, HalfSpace, Intersection, Product, Singleton
from .model import ControlSet, ExtendedProcess, ProblemSpec, integrate
from .pmp import Measure, MultiplierSet

__all__ = ["Fixture", "FIXTURES", "load_fixture", "reference_process", "strict_sequence"]

N, M_IMP, Q = 3, 2, 1


def _tx(j: int, coef: float = 1.0) -> Poly:
    return Poly.variable(1 + N, j, coef)


def _fields() -> tuple[PolyMap, PolyMap]:
    nf = 1 + N + Q
    x2x3 = Poly(nf, [(1.0, [0, 0, 1, 1, 0])])
    drift = PolyMap([Poly.constant(nf, 0.0), x2x3, Poly.constant(nf, 0.0)])
    zero = Poly.constant(1 + N, 0.0)
    one = Poly.constant(1 + N, 1.0)
    g1 = [one, zero, zero]
    g2 = [zero, Poly.constant(1 + N, -1.0), _tx(1, -1.0)]
    table = [g1[i] if j == 0 else g2[i] for i in range(N) for j in range(M_IMP)]
    return drift, PolyMap(table)


def _box_constraints(lower: float, upper_x1: Poly | None) -> tuple:
    """``-1 <= x_i <= 1`` as six affine pieces; ``upper_x1`` overrides the first."""
    hs = []
    for i in range(N):
        xi = _tx(1 + i)
        upper = upper_x1 if (i == 0 and upper_x1 is not None) else xi - 1.0
        hs.append(ConstraintFunction.smooth(upper))
        hs.append(ConstraintFunction.smooth(-xi + lower))
    return tuple(hs)


def _cost() -> Poly:
    # variables (t1, x1(3), t2, x2(3), v2); the final first coordinate has index 5
    return Poly.variable(3 + 2 * N, 5, -1.0)


def _initial_set() -> Intersection:
    return Intersection((Ball([1.0, 0.0, 0.0], 1.0 / 3.0), HalfSpace([1.0, 0.0, 0.0], 1.0)), transversal=True)


def make_problem(name: str) -> ProblemSpec:
    drift, impulse = _fields()
    if name == "example-4.1":
        t_face = _tx(1) - _tx(0) - 1.0  # x1 <= 1 + t
        constraints = _box_constraints(-1.0, t_face)
        final = Intersection((Ball([-1.0, 0.0, 0.0], 1.0), HalfSpace([-1.0, 0.0, 0.0], 1.0)), transversal=True)
        initial = _initial_set()
    elif name == "example-4.2":
        constraints = _box_constraints(-1.0, None)
        final = Box([-1.0, 0.0, 0.0], [0.0, 1.0, 1.0])
        initial = _initial_set()
    elif name == "example-4.3":
        constraints = _box_constraints(-1.0, None)
        final = Box([-1.0, 0.0, 0.0], [0.0, 1.0, 1.0])
        initial = Singleton([1.0, 0.0, 0.0])
    else:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}")
    target = Product((Singleton([0.0]), initial, Singleton([1.0]), final))
    return ProblemSpec(
        n=N,
        m=M_IMP,
        q=Q,
        drift=drift,
        impulse=impulse,
        constraints=constraints,
        cost=_cost(),
        target=target,
        cone=ConeSpec.full(M_IMP),
        controls=ControlSet.finite([[0.0]]),
        K=2.0,
        name=name,
    )


def reference_process(problem: ProblemSpec, cells: int = 400) -> ExtendedProcess:
    """Clock runs on ``[0, 1]``, then an impulse along ``-g1`` moves ``x1`` from 1 to 0."""
    if cells % 2:
        raise ValueError("the reference process needs an even cell count")
    s = np.linspace(0.0, 2.0, cells + 1)
    half = cells // 2
    w0 = np.concatenate([np.ones(half), np.zeros(half)])
    w = np.zeros((cells, 2))
    w[half:, 0] = -1.0
    return integrate(problem, s, w0, w, np.zeros((cells, 1)), 0.0, [1.0, 0.0, 0.0])


def strict_sequence(problem: ProblemSpec, k: int, cells: int = 400) -> ExtendedProcess:
    """Strict processes converging to the reference: ``(1-1/k, -1/k, 0)`` then ``(1/k, -1+1/k, 0)``."""
    s = np.linspace(0.0, 2.0, cells + 1)
    half = cells // 2
    w0 = np.concatenate([np.full(half, 1.0 - 1.0 / k), np.full(half, 1.0 / k)])
    w = np.zeros((cells, 2))
    w[:half, 0] = -1.0 / k
    w[half:, 0] = -1.0 + 1.0 / k
    return integrate(problem, s, w0, w, np.zeros((cells, 1)), 0.0, [1.0, 0.0, 0.0])


def normal_multipliers(proc: ExtendedProcess) -> MultiplierSet:
    """Cost multiplier one, everything else zero (the target normal absorbs the cost gradient)."""
    M = proc.M
    return MultiplierSet(
        p0=np.zeros(M + 1),
        p=np.zeros((M + 1, N)),
        pi=0.0,
        lam=1.0,
        measures=tuple(Measure.empty(1 + N) for _ in range(2 * N)),
    )


def degenerate_multipliers(proc: ExtendedProcess) -> MultiplierSet:
    """Abnormal set: ``p = (-1, 0, 0)``, unit atom at ``s = 0`` on the face ``x1 = 1``."""
    M = proc.M
    p = np.zeros((M + 1, N))
    p[:, 0] = -1.0
    measures = [Measure.empty(1 + N) for _ in range(2 * N)]
    measures[0] = Measure.atoms_at([0.0], [1.0], [[0.0, 1.0, 0.0, 0.0]])
    return MultiplierSet(p0=np.zeros(M + 1), p=p, pi=0.0, lam=0.0, measures=tuple(measures))


@dataclass(frozen=True)
class Fixture:
    name: str
    description: str

    def problem(self) -> ProblemSpec:
        return make_problem(self.name)

    def reference(self, cells: int = 400) -> ExtendedProcess:
        return reference_process(self.problem(), cells)

    def reference_multipliers(self, cells: int = 400) -> MultiplierSet | None:
        proc = self.reference(cells)
        if self.name == "example-4.2":
            return normal_multipliers(proc)
        if self.name == "example-4.3":
            return degenerate_multipliers(proc)
        return None


FIXTURES = {
    "example-4.1": Fixture("example-4.1", "time-dependent face x1 <= 1 + t; qualification chain certifies no gap"),
    "example-4.2": Fixture("example-4.2", "box state constraint; qualifications fail but the extremal is normal"),
    "example-4.3": Fixture("example-4.3", "fixed initial state; abnormal with degenerate multipliers, yet no gap"),
}


def load_fixture(name: str) -> Fixture:
    try:
        return FIXTURES[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None

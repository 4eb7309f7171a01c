"""Hamiltonian evaluation and residual checks of the constrained maximum principle.

Discretisation conventions (shared with :mod:`impgap.normality`):

* ``p0, p`` are node values; ``q`` adds the running integral of the
  constraint-measure directions.  At an interior node ``s_k`` only mass in
  ``[0, s_k[`` counts, at ``S`` all of it.
* On cell ``k`` the Hamiltonian, the adjoint right-hand side and the
  maximisation test use the cell value ``Q_k = (p0_k, p_k) + mass on [0, s_k]``
  and the state at the left node.
* The adjoint residual is ``(P_{k+1} - P_k)/ds_k + J_k^T Q_k`` with ``J_k`` the
  ``(t, x)`` Jacobian of ``f omega0 + G omega`` on the cell.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import ConeHull, GeometryError, hull_distance, hybrid_subdiff
from .model import ExtendedProcess, ModelError, ProblemSpec

LOGGER = logging.getLogger(__name__)

__all__ = [
    "Measure",
    "MultiplierSet",
    "PmpTolerances",
    "PmpReport",
    "Nondegeneracy",
    "GridMismatchError",
    "AtomOutsideGridError",
    "hamiltonian",
    "accumulate_q",
    "cell_q",
    "control_samples",
    "max_hamiltonian",
    "check_pmp",
    "check_nondegeneracy",
    "endpoint_normal_cone",
    "adjoint_jacobians",
]

LOCATION_TOL = 1e-12


class GridMismatchError(ModelError):
    pass


class AtomOutsideGridError(ModelError):
    pass


@dataclass(frozen=True, eq=False)
class Measure:
    """Nonnegative measure on ``[0, S]`` as atoms plus a cell-wise density.

    ``directions`` holds the vector ``(m0, m)`` attached to each atom and
    ``density_directions`` the one attached to each cell.
    """

    locations: np.ndarray
    masses: np.ndarray
    directions: np.ndarray
    density: np.ndarray | None = None
    density_directions: np.ndarray | None = None

    def __post_init__(self):
        locs = np.asarray(self.locations, dtype=float).ravel()
        masses = np.asarray(self.masses, dtype=float).ravel()
        dirs = np.asarray(self.directions, dtype=float)
        dirs = dirs.reshape(locs.size, dirs.shape[-1] if dirs.ndim == 2 else -1)
        if masses.size != locs.size:
            raise ValueError("atom masses and locations disagree")
        if np.any(masses < 0):
            raise ValueError("measure masses must be nonnegative")
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "directions", dirs)
        if self.density is not None:
            dens = np.asarray(self.density, dtype=float).ravel()
            if np.any(dens < 0):
                raise ValueError("measure density must be nonnegative")
            object.__setattr__(self, "density", dens)
            object.__setattr__(self, "density_directions", np.asarray(self.density_directions, dtype=float).reshape(dens.size, -1))

    @classmethod
    def empty(cls, dim: int) -> "Measure":
        return cls(np.zeros(0), np.zeros(0), np.zeros((0, dim)))

    @classmethod
    def atoms_at(cls, locations, masses, directions) -> "Measure":
        return cls(np.asarray(locations), np.asarray(masses), np.asarray(directions))

    def total_mass(self, ds: np.ndarray | None = None) -> float:
        total = float(self.masses.sum())
        if self.density is not None:
            if ds is None:
                raise ValueError("a density needs the grid spacing")
            total += float(self.density @ ds)
        return total

    def scaled(self, c: float) -> "Measure":
        dens = None if self.density is None else self.density * c
        return Measure(self.locations, self.masses * c, self.directions, dens, self.density_directions)

    def to_json(self) -> dict:
        out = {
            "atoms": [
                {"location": float(l), "mass": float(w), "direction": d.tolist()}
                for l, w, d in zip(self.locations, self.masses, self.directions)
            ]
        }
        if self.density is not None:
            out["density"] = self.density.tolist()
            out["density_directions"] = self.density_directions.tolist()
        return out

    @classmethod
    def from_json(cls, data: dict, dim: int) -> "Measure":
        atoms = data.get("atoms", [])
        locs = [a["location"] for a in atoms]
        masses = [a["mass"] for a in atoms]
        dirs = np.array([a["direction"] for a in atoms], dtype=float).reshape(len(atoms), dim)
        return cls(np.array(locs), np.array(masses), dirs, data.get("density"), data.get("density_directions"))


@dataclass(frozen=True, eq=False)
class MultiplierSet:
    """Multipliers ``(p0, p, pi, lam, mu_1..mu_N)`` on a pseudo-time grid."""

    p0: np.ndarray
    p: np.ndarray
    pi: float
    lam: float
    measures: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "p0", np.asarray(self.p0, dtype=float).ravel())
        object.__setattr__(self, "p", np.atleast_2d(np.asarray(self.p, dtype=float)))
        object.__setattr__(self, "measures", tuple(self.measures))
        if self.pi > 0:
            raise ValueError("pi must be nonpositive")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")

    @property
    def nodes(self) -> int:
        return self.p0.size

    def total_mass(self, ds: np.ndarray | None = None) -> float:
        return sum(mu.total_mass(ds) for mu in self.measures)

    def scaled(self, c: float) -> "MultiplierSet":
        if c <= 0:
            raise ValueError("scale must be positive")
        return MultiplierSet(self.p0 * c, self.p * c, self.pi * c, self.lam * c, tuple(mu.scaled(c) for mu in self.measures))

    def to_json(self) -> dict:
        return {
            "p0": self.p0.tolist(),
            "p": self.p.tolist(),
            "pi": float(self.pi),
            "lam": float(self.lam),
            "measures": [mu.to_json() for mu in self.measures],
        }

    @classmethod
    def from_json(cls, data: dict) -> "MultiplierSet":
        p = np.asarray(data["p"], dtype=float)
        dim = 1 + p.shape[1]
        return cls(
            np.asarray(data["p0"], dtype=float),
            p,
            float(data["pi"]),
            float(data["lam"]),
            tuple(Measure.from_json(mu, dim) for mu in data.get("measures", [])),
        )


def hamiltonian(problem: ProblemSpec, t, x, p0, p, pi, omega0, omega, a) -> np.ndarray:
    """``p0 w0 + p.(f w0 + G w) + pi |w|``; broadcasts over leading axes."""
    x = np.asarray(x, dtype=float)
    t = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:-1])
    tx = np.concatenate([t[..., None], x], axis=-1)
    f = problem.drift_at(tx, a)
    G = problem.impulse_at(tx)
    omega = np.asarray(omega, dtype=float)
    w0 = np.asarray(omega0, dtype=float)
    vel = f * w0[..., None] + np.einsum("...ij,...j->...i", G, omega)
    return p0 * w0 + np.einsum("...i,...i->...", np.asarray(p, dtype=float), vel) + pi * np.linalg.norm(omega, axis=-1)


def _atom_prefix(mult: MultiplierSet, s: np.ndarray, closed: bool) -> np.ndarray:
    """Running atom mass per node: ``[0, s_k[`` (or ``[0, s_k]`` when closed)."""
    out = np.zeros((s.size, mult.p.shape[1] + 1))
    S = s[-1]
    for mu in mult.measures:
        if mu.locations.size == 0:
            continue
        if np.any(mu.locations < -LOCATION_TOL) or np.any(mu.locations > S + LOCATION_TOL * max(1.0, S)):
            raise AtomOutsideGridError("a measure atom lies outside [0, S]")
        weighted = mu.masses[:, None] * mu.directions
        tol = LOCATION_TOL * max(1.0, S)
        for k, sk in enumerate(s):
            sel = mu.locations <= sk + tol if closed else mu.locations < sk - tol
            if np.any(sel):
                out[k] += weighted[sel].sum(axis=0)
    return out


def _density_prefix(mult: MultiplierSet, s: np.ndarray) -> np.ndarray:
    """Running density mass over cells ``j < k`` at node ``k``."""
    out = np.zeros((s.size, mult.p.shape[1] + 1))
    ds = np.diff(s)
    for mu in mult.measures:
        if mu.density is None:
            continue
        if mu.density.size != ds.size:
            raise GridMismatchError("measure density does not match the grid")
        inc = (mu.density * ds)[:, None] * mu.density_directions
        out[1:] += np.cumsum(inc, axis=0)
    return out


def _check_grid(mult: MultiplierSet, s: np.ndarray) -> None:
    if mult.p0.size != s.size or mult.p.shape[0] != s.size:
        raise GridMismatchError(f"multipliers have {mult.p0.size} nodes, grid has {s.size}")


def accumulate_q(mult: MultiplierSet, s) -> tuple[np.ndarray, np.ndarray]:
    """Node values of ``(q0, q)``: left-open accumulation inside, closed at ``S``."""
    s = np.asarray(s, dtype=float)
    _check_grid(mult, s)
    P = np.column_stack([mult.p0, mult.p])
    acc = _atom_prefix(mult, s, closed=False) + _density_prefix(mult, s)
    acc[-1] = _atom_prefix(mult, s[-1:], closed=True)[0] + _density_prefix(mult, s)[-1]
    Q = P + acc
    return Q[:, 0], Q[:, 1:]


def cell_q(mult: MultiplierSet, s) -> np.ndarray:
    """Cell values ``Q_k`` (shape ``(M, 1+n)``): left-node ``p`` plus mass on ``[0, s_k]``."""
    s = np.asarray(s, dtype=float)
    _check_grid(mult, s)
    P = np.column_stack([mult.p0, mult.p])[:-1]
    atoms = _atom_prefix(mult, s[:-1], closed=True)
    dens = _density_prefix(mult, s)[:-1]
    return P + atoms + dens


def control_samples(problem: ProblemSpec, directions: int = 64, seed: int = 0) -> np.ndarray:
    """Unit directions of the control cone used for maximisation tests."""
    return problem.cone.unit_samples(directions, seed)


def max_hamiltonian(problem: ProblemSpec, tx: np.ndarray, Q: np.ndarray, pi: float, dirs: np.ndarray) -> np.ndarray:
    """Sampled supremum of the Hamiltonian over the admissible controls.

    The Hamiltonian is affine in the clock rate at a fixed direction, so its
    maximum over ``omega0`` in ``[0, 1]`` is attained at an end.
    """
    A = problem.controls.samples()
    f = problem.drift_at(tx[:, None, :], A[None, :, :])  # (M, |A|, n)
    clock = Q[:, 0] + np.einsum("ki,kai->ka", Q[:, 1:], f).max(axis=1)
    if dirs.shape[0] == 0:
        return clock
    G = problem.impulse_at(tx)
    impulse = np.einsum("ki,kij,dj->kd", Q[:, 1:], G, dirs).max(axis=1) + pi
    return np.maximum(clock, impulse)


def adjoint_jacobians(problem: ProblemSpec, proc: ExtendedProcess) -> np.ndarray:
    """Cell Jacobians of ``f omega0 + G omega`` in ``(t, x)``, shape ``(M, n, 1+n)``."""
    tx = proc.tx[:-1]
    fj = problem.drift_jacobian(tx, proc.alpha)[..., : 1 + problem.n]
    gj = problem.impulse_jacobian(tx)
    return fj * proc.omega0[:, None, None] + np.einsum("kijc,kj->kic", gj, proc.omega)


def endpoint_normal_cone(problem: ProblemSpec, proc: ExtendedProcess, tol: float = 1e-8, snap: float = 0.0) -> ConeHull:
    """Normal cone of the target times ``]-inf, K]`` at the endpoint data.

    Endpoint data within ``snap`` of the target is first projected onto it.
    """
    e = problem.endpoint_vector(proc)
    if snap > 0 and problem.target.distance(e[:-1]) <= snap:
        e[:-1] = problem.target.project(e[:-1])
    base = problem.target.normal_cone(e[:-1], tol)
    d = e.size
    gens = np.zeros((base.generators.shape[0], d))
    gens[:, :-1] = base.generators
    lin = np.zeros((base.lineality.shape[0], d))
    lin[:, :-1] = base.lineality
    if np.isfinite(problem.K) and e[-1] >= problem.K - tol:
        extra = np.zeros((1, d))
        extra[0, -1] = 1.0
        gens = np.vstack([gens, extra])
    return ConeHull(d, gens, lin)


@dataclass(frozen=True)
class PmpTolerances:
    algebraic: float = 1e-6
    defect: float = 1e-4
    adjoint: float = 1e-4
    hamiltonian: float = 1e-4
    hamiltonian_fraction: float = 1.0
    active: float = 1e-8
    directions: int = 64
    variation_margin: float = 1e-8


@dataclass
class PmpReport:
    nontriviality: float
    adjoint_residual: float
    transversality_distance: float
    max_defect: float
    hamiltonian_max: float
    hamiltonian_fraction: float
    subdiff_distance: float
    support_violation: float
    pi_residual: float
    strengthened_margin: float | None
    passed: bool
    failures: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        def num(v):
            if v is None:
                return None
            return float(v) if np.isfinite(v) else "inf"

        return {
            "nontriviality": num(self.nontriviality),
            "adjoint_residual": num(self.adjoint_residual),
            "transversality_distance": num(self.transversality_distance),
            "max_defect": num(self.max_defect),
            "hamiltonian_max": num(self.hamiltonian_max),
            "hamiltonian_fraction": num(self.hamiltonian_fraction),
            "subdiff_distance": num(self.subdiff_distance),
            "support_violation": num(self.support_violation),
            "pi_residual": num(self.pi_residual),
            "strengthened_margin": num(self.strengthened_margin),
            "passed": bool(self.passed),
            "failures": list(self.failures),
            "notes": list(self.notes),
        }


def _state_at(proc: ExtendedProcess, s: float) -> np.ndarray:
    return np.array([np.interp(s, proc.s, proc.y0)] + [np.interp(s, proc.s, proc.y[:, i]) for i in range(proc.y.shape[1])])


def _measure_checks(problem: ProblemSpec, proc: ExtendedProcess, mult: MultiplierSet, tol_active: float) -> tuple[float, float]:
    dist, off_support = 0.0, 0.0
    ds = proc.ds
    for i, mu in enumerate(mult.measures):
        h = problem.constraints[i]
        for loc, mass, direction in zip(mu.locations, mu.masses, mu.directions):
            if mass <= 0:
                continue
            point = _state_at(proc, loc)
            if h(point) < -tol_active:
                off_support += mass
                continue
            grads = hybrid_subdiff(h, point)
            dist = max(dist, hull_distance(grads.points, direction))
        if mu.density is not None:
            for k in np.flatnonzero(mu.density > 0):
                point = proc.tx[k]
                if h(point) < -tol_active:
                    off_support += mu.density[k] * ds[k]
                    continue
                grads = hybrid_subdiff(h, point)
                dist = max(dist, hull_distance(grads.points, mu.density_directions[k]))
    return dist, off_support


def check_pmp(problem: ProblemSpec, proc: ExtendedProcess, mult: MultiplierSet, tol: PmpTolerances = PmpTolerances()) -> PmpReport:
    """Residual of every maximum-principle condition for the given multipliers."""
    s = proc.s
    _check_grid(mult, s)
    if len(mult.measures) not in (0, len(problem.constraints)):
        raise GridMismatchError("one measure per state constraint is required")
    notes: list[str] = []
    ds = proc.ds
    mass = mult.total_mass(ds)
    nontriv = float(np.max(np.abs(mult.p0)) + np.max(np.abs(mult.p)) + mass + mult.lam)

    Q = cell_q(mult, s)
    P = np.column_stack([mult.p0, mult.p])
    J = adjoint_jacobians(problem, proc)
    rhs = np.einsum("kic,ki->kc", J, Q[:, 1:])
    adjoint = float(np.max(np.abs(np.diff(P, axis=0) / ds[:, None] + rhs))) if proc.M else 0.0

    q0, q = accumulate_q(mult, s)
    E = np.concatenate([[mult.p0[0]], mult.p[0], [-q0[-1]], -q[-1], [-mult.pi]])
    grad_cost = problem.cost.grad(problem.endpoint_vector(proc))
    try:
        cone = endpoint_normal_cone(problem, proc, tol.active)
        transv = cone.distance(E - mult.lam * grad_cost)
    except GeometryError as exc:
        transv = float("inf")
        notes.append(f"target normal cone refused: {exc}")

    tx = proc.tx[:-1]
    F = proc.rates(problem)
    H = Q[:, 0] * proc.omega0 + np.einsum("ki,ki->k", Q[:, 1:], F) + mult.pi * np.linalg.norm(proc.omega, axis=1)
    dirs = control_samples(problem, tol.directions)
    Hmax = max_hamiltonian(problem, tx, Q, mult.pi, dirs)
    defect = float(np.max(np.maximum(Hmax - H, 0.0))) if proc.M else 0.0
    h_abs = np.abs(H)
    h_frac = float(np.mean(h_abs <= tol.hamiltonian)) if proc.M else 1.0

    sub_dist, off_support = _measure_checks(problem, proc, mult, tol.active)

    e = problem.endpoint_vector(proc)
    pi_res = 0.0
    if abs(mult.lam * grad_cost[-1]) <= 1e-12 and e[-1] < problem.K - tol.variation_margin:
        pi_res = abs(mult.pi)
    strengthened = None
    if proc.y0[-1] > proc.y0[0] + tol.algebraic:
        strengthened = float(np.max(np.abs(mult.p)) + mass + mult.lam)

    failures = []
    if not nontriv > tol.algebraic:
        failures.append("nontriviality")
    if adjoint > tol.adjoint:
        failures.append("adjoint")
    if transv > tol.algebraic:
        failures.append("transversality")
    if defect > tol.defect:
        failures.append("maximization")
    if h_frac < tol.hamiltonian_fraction:
        failures.append("vanishing-hamiltonian")
    if sub_dist > tol.algebraic:
        failures.append("subdifferential")
    if off_support > tol.algebraic:
        failures.append("support")
    if pi_res > tol.algebraic:
        failures.append("variation-multiplier")
    if strengthened is not None and not strengthened > tol.algebraic:
        failures.append("strengthened-nontriviality")
    return PmpReport(
        nontriviality=nontriv,
        adjoint_residual=adjoint,
        transversality_distance=float(transv),
        max_defect=defect,
        hamiltonian_max=float(h_abs.max()) if proc.M else 0.0,
        hamiltonian_fraction=h_frac,
        subdiff_distance=float(sub_dist),
        support_violation=float(off_support),
        pi_residual=float(pi_res),
        strengthened_margin=strengthened,
        passed=not failures,
        failures=failures,
        notes=notes,
    )


@dataclass(frozen=True)
class Nondegeneracy:
    margin: float
    case: str  # "clock-fixed" or "clock-advancing"

    @property
    def degenerate(self) -> bool:
        return self.margin <= 1e-9

    def to_json(self) -> dict:
        return {"margin": float(self.margin), "case": self.case, "degenerate": self.degenerate}


def check_nondegeneracy(proc: ExtendedProcess, mult: MultiplierSet) -> Nondegeneracy:
    """Strengthened non-triviality sum, ignoring everything that happens at ``s = 0`` only."""
    s = proc.s
    ds = proc.ds
    tol = LOCATION_TOL * max(1.0, proc.S)
    after = 0.0
    for mu in mult.measures:
        after += float(mu.masses[mu.locations > tol].sum())
        if mu.density is not None:
            after += float(mu.density @ ds)
    Q = cell_q(mult, s)
    qsup = float(np.max(np.abs(Q[:, 1:]))) if Q.size else 0.0
    if abs(proc.y0[-1] - proc.y0[0]) <= 1e-12 * max(1.0, abs(proc.y0[0])):
        q0sup = float(np.max(np.abs(Q[:, 0]))) if Q.size else 0.0
        return Nondegeneracy(after + q0sup + qsup + mult.lam, "clock-fixed")
    return Nondegeneracy(after + qsup + mult.lam, "clock-advancing")

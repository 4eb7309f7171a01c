"""Normal versus abnormal classification by linear programming.

At a fixed process every maximum-principle condition is linear in the
multipliers.  The set of multiplier sets with cost multiplier zero is then a
polyhedral cone, and the extremal is abnormal exactly when that cone contains
a nonzero element.  Nonzero means positive constraint-measure mass or a
nonzero initial costate (the costate is then determined by the adjoint
recursion), so a handful of bounded LPs decide the question exactly at the
given discretisation:

* maximise the total measure mass;
* if that is zero, maximise and minimise each component of ``(p0, p)(0)``.

The same assembly with the cost multiplier fixed to one and a minimised
residual bound gives :func:`fit_multipliers`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .geometry import GeometryError, hybrid_subdiff
from .model import ExtendedProcess, ProblemSpec, refine
from .pmp import (
    Measure,
    MultiplierSet,
    PmpTolerances,
    adjoint_jacobians,
    check_nondegeneracy,
    check_pmp,
    control_samples,
    endpoint_normal_cone,
)

LOGGER = logging.getLogger(__name__)

__all__ = ["NormalityOptions", "AbnormalLP", "NormalityVerdict", "assemble", "classify", "fit_multipliers", "FitResult"]


@dataclass(frozen=True)
class NormalityOptions:
    """LP settings.

    Attributes
    ----------
    directions : unit directions of the control cone in the maximisation rows.
    active_tol : a node may carry measure mass when ``h >= -active_tol``.
    slack : allowed residual of each homogeneous row.
    threshold : an LP optimum above this counts as a nonzero multiplier.
    bound : box bound on the normalised unknowns.
    refine_factor : grid refinement used to confirm a verdict.
    endpoint_snap : endpoint data this close to the target is projected onto it
        before taking its normal cone (re-integration on a refined grid moves
        the endpoint by the discretization error).
    confirm : run the confirmation at the refined grid.
    pmp : tolerances for re-checking certificates.
    """

    directions: int = 64
    active_tol: float = 1e-8
    slack: float = 1e-9
    threshold: float = 1e-6
    bound: float = 1.0
    refine_factor: int = 2
    endpoint_snap: float = 1e-3
    confirm: bool = True
    pmp: PmpTolerances = field(default_factory=PmpTolerances)


class _Layout:
    """Column bookkeeping for the LP unknowns."""

    def __init__(self):
        self.size = 0
        self.blocks: dict[str, slice] = {}

    def add(self, name: str, count: int) -> slice:
        sl = slice(self.size, self.size + count)
        self.blocks[name] = sl
        self.size += count
        return sl


@dataclass
class AbnormalLP:
    """Linear constraints on the multipliers of a fixed process.

    ``A_eq x = 0`` for the adjoint, accumulation and transversality rows and
    ``A_ub x <= slack`` (or ``<= t`` in fitting mode) for the Hamiltonian rows,
    with variable bounds in ``bounds``.  ``atoms`` lists, per measure
    column, the constraint index, node and gradient generator.
    """

    problem: ProblemSpec
    process: ExtendedProcess
    layout: _Layout
    A_eq: sparse.csr_matrix
    b_eq: np.ndarray
    A_ub: sparse.csr_matrix
    b_ub: np.ndarray
    bounds: np.ndarray
    atoms: list
    info: dict

    @property
    def P(self) -> slice:
        return self.layout.blocks["P"]

    @property
    def C(self) -> slice:
        return self.layout.blocks["C"]

    @property
    def w(self) -> slice:
        return self.layout.blocks["w"]

    def solve(self, objective: np.ndarray, bounds: np.ndarray | None = None):
        b = self.bounds if bounds is None else bounds
        res = linprog(
            objective,
            A_ub=self.A_ub,
            b_ub=self.b_ub,
            A_eq=self.A_eq if self.A_eq.shape[0] else None,
            b_eq=self.b_eq if self.A_eq.shape[0] else None,
            bounds=list(map(tuple, b)),
            method="highs",
        )
        return res

    def multipliers(self, x: np.ndarray) -> MultiplierSet:
        """Multiplier set encoded by an LP point (atoms merged per node)."""
        proc = self.process
        d = 1 + self.problem.n
        P = x[self.P].reshape(proc.M + 1, d)
        lay = self.layout.blocks
        pi = min(float(x[lay["pi"]][0]), 0.0)
        lam = float(x[lay["lam"]][0])
        weights = x[self.w]
        measures = []
        for i in range(len(self.problem.constraints)):
            locs, masses, dirs = [], [], []
            cols = [c for c, (ci, _, _) in enumerate(self.atoms) if ci == i]
            by_node: dict[int, list] = {}
            for c in cols:
                by_node.setdefault(self.atoms[c][1], []).append(c)
            for k in sorted(by_node):
                wk = np.array([max(weights[c], 0.0) for c in by_node[k]])
                mass = float(wk.sum())
                if mass <= 1e-13:
                    continue
                g = np.array([self.atoms[c][2] for c in by_node[k]])
                locs.append(proc.s[k])
                masses.append(mass)
                dirs.append(wk @ g / mass)
            measures.append(Measure.atoms_at(locs, masses, np.array(dirs).reshape(len(locs), d)))
        return MultiplierSet(P[:, 0], P[:, 1:], pi, max(lam, 0.0), tuple(measures))


def assemble(problem: ProblemSpec, process: ExtendedProcess, options: NormalityOptions = NormalityOptions(), lam: float = 0.0, residual_var: bool = False) -> AbnormalLP:
    """Linear constraints of the maximum principle at ``process``.

    Parameters
    ----------
    lam : value the cost multiplier is fixed to.
    residual_var : add a variable ``t >= 0`` bounding every Hamiltonian
        residual instead of the fixed slack, and a variable ``tt >= 0``
        bounding the transversality residuals (fitting mode).
    """
    proc = process
    n, M = problem.n, proc.M
    d = 1 + n
    ds = proc.ds
    lay = _Layout()
    sl_P = lay.add("P", (M + 1) * d)
    sl_C = lay.add("C", (M + 1) * d)
    sl_pi = lay.add("pi", 1)
    sl_lam = lay.add("lam", 1)

    # measure generators on active nodes
    atoms = []
    degenerate_nodes = 0
    tx = proc.tx
    for i, h in enumerate(problem.constraints):
        vals = h(tx)
        for k in np.flatnonzero(vals >= -options.active_tol):
            grads = hybrid_subdiff(h, tx[k])
            degenerate_nodes += int(grads.degenerate)
            for g in grads.points:
                atoms.append((i, int(k), np.asarray(g, dtype=float)))
    sl_w = lay.add("w", len(atoms))

    try:
        cone = endpoint_normal_cone(problem, proc, options.pmp.active, options.endpoint_snap)
    except GeometryError as exc:
        raise GeometryError(f"endpoint normal cone unavailable: {exc}") from exc
    sl_g = lay.add("cone_gen", cone.generators.shape[0])
    sl_l = lay.add("cone_lin", cone.lineality.shape[0])
    sl_t = lay.add("t", 1 if residual_var else 0)
    sl_tt = lay.add("tt", 1 if residual_var else 0)

    def P_col(k, c):
        return sl_P.start + k * d + c

    def C_col(k, c):
        return sl_C.start + k * d + c

    eq_r, eq_c, eq_v = [], [], []
    ub_r, ub_c, ub_v = [], [], []
    n_eq = 0
    n_ub = 0

    def put(rows, cols, vals, r, c, v):
        rows.append(np.broadcast_to(np.asarray(r), np.shape(v)).ravel())
        cols.append(np.asarray(c).ravel())
        vals.append(np.asarray(v, dtype=float).ravel())

    # adjoint: (P_{k+1} - P_k)/ds_k + J_k^T (P_k + C_k)_x = 0
    J = adjoint_jacobians(problem, proc)  # (M, n, d)
    ks = np.arange(M)
    for c in range(d):
        rows = n_eq + ks * d + c
        put(eq_r, eq_c, eq_v, rows, P_col(ks + 1, c), 1.0 / ds)
        put(eq_r, eq_c, eq_v, rows, P_col(ks, c), -1.0 / ds)
        for i in range(n):
            coef = J[:, i, c]
            put(eq_r, eq_c, eq_v, rows, P_col(ks, 1 + i), coef)
            put(eq_r, eq_c, eq_v, rows, C_col(ks, 1 + i), coef)
    n_eq += M * d

    # measure accumulation: C_k - C_{k-1} - sum of atoms at node k = 0
    kk = np.arange(M + 1)
    for c in range(d):
        rows = n_eq + kk * d + c
        put(eq_r, eq_c, eq_v, rows, C_col(kk, c), np.ones(M + 1))
        put(eq_r, eq_c, eq_v, rows[1:], C_col(kk[:-1], c), -np.ones(M))
    for col, (i, k, g) in enumerate(atoms):
        for c in range(d):
            if g[c] != 0.0:
                put(eq_r, eq_c, eq_v, n_eq + k * d + c, sl_w.start + col, -g[c])
    n_eq += (M + 1) * d

    # transversality: (P_0, -(P_M + C_M), -pi) - lam grad = generators + lineality
    # (in fitting mode each row is only bounded by the variable tt)
    e = problem.endpoint_vector(proc)
    grad = problem.cost.grad(e)
    tr_r, tr_c, tr_v = [], [], []
    for c in range(d):
        put(tr_r, tr_c, tr_v, c, P_col(0, c), 1.0)
        put(tr_r, tr_c, tr_v, d + c, P_col(M, c), -1.0)
        put(tr_r, tr_c, tr_v, d + c, C_col(M, c), -1.0)
    put(tr_r, tr_c, tr_v, 2 * d, sl_pi.start, -1.0)
    put(tr_r, tr_c, tr_v, np.arange(2 * d + 1), np.full(2 * d + 1, sl_lam.start), -grad)
    for j, gen in enumerate(cone.generators):
        put(tr_r, tr_c, tr_v, np.arange(2 * d + 1), np.full(2 * d + 1, sl_g.start + j), -gen)
    for j, gen in enumerate(cone.lineality):
        put(tr_r, tr_c, tr_v, np.arange(2 * d + 1), np.full(2 * d + 1, sl_l.start + j), -gen)
    ntr = 2 * d + 1
    if residual_var:
        for sign in (1.0, -1.0):
            for r, c, v in zip(tr_r, tr_c, tr_v):
                put(ub_r, ub_c, ub_v, n_ub + r, c, sign * v)
            put(ub_r, ub_c, ub_v, n_ub + np.arange(ntr), np.full(ntr, sl_tt.start), -np.ones(ntr))
            n_ub += ntr
    else:
        for r, c, v in zip(tr_r, tr_c, tr_v):
            put(eq_r, eq_c, eq_v, n_eq + r, c, v)
        n_eq += ntr

    # Hamiltonian rows on cells, with Q_k = P_k + C_k
    F = proc.rates(problem)  # (M, n)
    wnorm = np.linalg.norm(proc.omega, axis=1)
    tol_col = sl_t.start if residual_var else None

    def q_terms(rows, qcoef):
        """Add ``sum_c qcoef[:, c] Q_{k,c}`` to ``rows`` (one per cell)."""
        for c in range(d):
            put(ub_r, ub_c, ub_v, rows, P_col(ks, c), qcoef[:, c])
            put(ub_r, ub_c, ub_v, rows, C_col(ks, c), qcoef[:, c])

    hcoef = np.column_stack([proc.omega0, F])  # H_k = hcoef . Q_k + pi |omega_k|
    # |H_k| <= slack as two inequalities
    for sign in (1.0, -1.0):
        rows = n_ub + ks
        q_terms(rows, sign * hcoef)
        put(ub_r, ub_c, ub_v, rows, np.full(M, sl_pi.start), sign * wnorm)
        if residual_var:
            put(ub_r, ub_c, ub_v, rows, np.full(M, tol_col), -np.ones(M))
        n_ub += M

    # dominance: candidate Hamiltonian minus H_k <= slack
    A = problem.controls.samples()
    dirs = control_samples(problem, options.directions)
    txc = proc.tx[:-1]
    for a in A:
        f = problem.drift_at(txc, np.broadcast_to(a, (M, a.size)))
        coef = np.column_stack([np.ones(M), f]) - hcoef
        rows = n_ub + ks
        q_terms(rows, coef)
        put(ub_r, ub_c, ub_v, rows, np.full(M, sl_pi.start), -wnorm)
        if residual_var:
            put(ub_r, ub_c, ub_v, rows, np.full(M, tol_col), -np.ones(M))
        n_ub += M
    if dirs.shape[0]:
        G = problem.impulse_at(txc)  # (M, n, m)
        Gd = np.einsum("kij,dj->dki", G, dirs)  # (D, M, n)
        for dd in range(dirs.shape[0]):
            coef = np.column_stack([np.zeros(M), Gd[dd]]) - hcoef
            rows = n_ub + ks
            q_terms(rows, coef)
            put(ub_r, ub_c, ub_v, rows, np.full(M, sl_pi.start), 1.0 - wnorm)
            if residual_var:
                put(ub_r, ub_c, ub_v, rows, np.full(M, tol_col), -np.ones(M))
            n_ub += M

    nvar = lay.size
    A_eq = sparse.csr_matrix((np.concatenate(eq_v), (np.concatenate(eq_r), np.concatenate(eq_c))), shape=(n_eq, nvar))
    A_ub = sparse.csr_matrix((np.concatenate(ub_v), (np.concatenate(ub_r), np.concatenate(ub_c))), shape=(n_ub, nvar))
    b_ub = np.full(n_ub, 0.0 if residual_var else options.slack)
    b_eq = np.zeros(n_eq)

    big = 1e6
    B = options.bound
    bounds = np.tile([-big, big], (nvar, 1))
    bounds[sl_P.start: sl_P.start + d] = [-B, B]
    bounds[sl_pi] = [-big, 0.0]
    bounds[sl_lam] = [lam, lam]
    bounds[sl_w] = [0.0, B]
    bounds[sl_g] = [0.0, big]
    if residual_var:
        bounds[sl_t] = [0.0, big]
        bounds[sl_tt] = [0.0, big]
    info = {
        "cells": M,
        "directions": int(dirs.shape[0]),
        "control_samples": int(A.shape[0]),
        "atom_columns": len(atoms),
        "degenerate_nodes": degenerate_nodes,
        "rows_eq": int(A_eq.shape[0]),
        "rows_ub": int(A_ub.shape[0]),
        "variables": nvar,
    }
    return AbnormalLP(problem, proc, lay, A_eq, b_eq, A_ub, b_ub, bounds, atoms, info)


@dataclass
class NormalityVerdict:
    """Outcome of :func:`classify`.

    ``verdict`` is ``normal``, ``abnormal`` or ``inconclusive``;
    ``degeneracy`` is ``degenerate`` or ``nondegenerate`` for abnormal
    extremals and ``None`` otherwise.
    """

    verdict: str
    degeneracy: str | None
    certificate: MultiplierSet | None
    diagnostics: dict

    @property
    def label(self) -> str:
        if self.verdict == "abnormal" and self.degeneracy == "degenerate":
            return "degenerate-abnormal"
        return self.verdict

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "degeneracy": self.degeneracy,
            "label": self.label,
            "certificate": None if self.certificate is None else self.certificate.to_json(),
            "diagnostics": self.diagnostics,
            "limitation": "decided on the stated grid and control samples; atomic measures only",
        }


class _LpFailure(RuntimeError):
    pass


def _maximise(lp: AbnormalLP, objective: np.ndarray, bounds=None):
    res = lp.solve(-objective, bounds)
    if res.status != 0:
        raise _LpFailure(f"LP status {res.status}: {res.message}")
    return -float(res.fun), res.x


def _nonzero_search(lp: AbnormalLP, options: NormalityOptions):
    """Largest nontriviality found and the LP point attaining it."""
    runs = []
    obj = np.zeros(lp.layout.size)
    obj[lp.w] = 1.0
    value, x = _maximise(lp, obj)
    runs.append({"objective": "measure-mass", "value": value})
    if value > options.threshold:
        return value, x, runs
    # no mass: only the initial costate can be nonzero
    bounds = lp.bounds.copy()
    bounds[lp.w] = [0.0, 0.0]
    d = 1 + lp.problem.n
    best = (0.0, None)
    for c in range(d):
        for sign in (1.0, -1.0):
            obj = np.zeros(lp.layout.size)
            obj[lp.P.start + c] = sign
            value, x = _maximise(lp, obj, bounds)
            runs.append({"objective": f"{'+' if sign > 0 else '-'}costate[{c}]", "value": value})
            if value > best[0]:
                best = (value, x)
            if value > options.threshold:
                return value, x, runs
    return best[0], best[1], runs


def _degeneracy_search(lp: AbnormalLP, options: NormalityOptions):
    """Search for an abnormal set with mass after the start or nonzero cell costate."""
    proc = lp.process
    d = 1 + lp.problem.n
    runs = []
    later = np.array([k > 0 for (_, k, _) in lp.atoms], dtype=bool)
    obj = np.zeros(lp.layout.size)
    obj[lp.w.start + np.flatnonzero(later)] = 1.0
    if later.any():
        value, x = _maximise(lp, obj)
        runs.append({"objective": "mass-after-start", "value": value})
        if value > options.threshold:
            return value, x, runs
    bounds = lp.bounds.copy()
    for col in np.flatnonzero(later):
        bounds[lp.w.start + col] = [0.0, 0.0]
    clock_fixed = abs(proc.y0[-1] - proc.y0[0]) <= 1e-12 * max(1.0, abs(proc.y0[0]))
    comps = range(d) if clock_fixed else range(1, d)
    for c in comps:
        for sign in (1.0, -1.0):
            obj = np.zeros(lp.layout.size)
            obj[lp.P.start + c] = sign
            obj[lp.C.start + c] = sign
            value, x = _maximise(lp, obj, bounds)
            runs.append({"objective": f"{'+' if sign > 0 else '-'}cell-costate[{c}]", "value": value})
            if value > options.threshold:
                return value, x, runs
    return 0.0, None, runs


def _clean(x: np.ndarray, options: NormalityOptions) -> np.ndarray:
    # entries at the slack level are LP noise; the certificate is re-checked afterwards
    return np.where(np.abs(x) < 100.0 * options.slack, 0.0, x)


def _normalise(mult: MultiplierSet, ds: np.ndarray) -> MultiplierSet:
    scale = max(float(np.max(np.abs(mult.p))), float(np.max(np.abs(mult.p0))), mult.total_mass(ds))
    return mult.scaled(1.0 / scale) if scale > 0 else mult


def _classify_once(problem: ProblemSpec, proc: ExtendedProcess, options: NormalityOptions) -> dict:
    lp = assemble(problem, proc, options)
    value, x, runs = _nonzero_search(lp, options)
    out = {"lp": lp.info, "runs": runs, "nontriviality": value}
    if value <= options.threshold:
        out["verdict"] = "normal"
        return out
    out["verdict"] = "abnormal"
    x = _clean(x, options)
    cert = _normalise(lp.multipliers(x), proc.ds)
    dvalue, dx, druns = _degeneracy_search(lp, options)
    out["degeneracy_runs"] = druns
    if dvalue > options.threshold:
        out["degeneracy"] = "nondegenerate"
        cert = _normalise(lp.multipliers(_clean(dx, options)), proc.ds)
    else:
        out["degeneracy"] = "degenerate"
    out["certificate"] = cert
    return out


def classify(problem: ProblemSpec, process: ExtendedProcess, options: NormalityOptions = NormalityOptions()) -> NormalityVerdict:
    """Normal, abnormal (degenerate or not) or inconclusive, with a certificate when abnormal.

    The verdict is computed at the process grid and, when ``options.confirm``
    is set, again at a refined grid with twice the control directions.  A
    disagreement, an LP failure or a certificate that fails the maximum
    principle check gives ``inconclusive``.
    """
    diagnostics: dict = {"grids": []}
    try:
        first = _classify_once(problem, process, options)
    except (_LpFailure, GeometryError) as exc:
        return NormalityVerdict("inconclusive", None, None, {"error": str(exc)})
    diagnostics["grids"].append({k: v for k, v in first.items() if k != "certificate"})
    verdict = first["verdict"]
    degeneracy = first.get("degeneracy")
    cert = first.get("certificate")
    if options.confirm:
        fine = refine(problem, process, options.refine_factor)
        fine_opts = replace(options, directions=options.refine_factor * options.directions)
        try:
            second = _classify_once(problem, fine, fine_opts)
        except (_LpFailure, GeometryError) as exc:
            diagnostics["error"] = f"refined grid: {exc}"
            return NormalityVerdict("inconclusive", None, cert, diagnostics)
        diagnostics["grids"].append({k: v for k, v in second.items() if k != "certificate"})
        if second["verdict"] != verdict:
            diagnostics["error"] = "verdict changed under refinement"
            return NormalityVerdict("inconclusive", None, cert, diagnostics)
    if verdict == "normal":
        return NormalityVerdict("normal", None, None, diagnostics)
    report = check_pmp(problem, process, cert, options.pmp)
    nondeg = check_nondegeneracy(process, cert)
    diagnostics["certificate_check"] = report.to_json()
    diagnostics["certificate_nondegeneracy"] = nondeg.to_json()
    if not report.passed:
        diagnostics["error"] = f"certificate fails the maximum principle check: {report.failures}"
        return NormalityVerdict("inconclusive", None, cert, diagnostics)
    return NormalityVerdict("abnormal", degeneracy, cert, diagnostics)


@dataclass
class FitResult:
    multipliers: MultiplierSet
    residual: float
    info: dict


def fit_multipliers(problem: ProblemSpec, process: ExtendedProcess, options: NormalityOptions = NormalityOptions(), lam: float = 1.0) -> FitResult:
    """Multipliers with the given cost multiplier minimising the residuals of the maximum principle.

    The adjoint and accumulation rows hold exactly.  The vanishing and
    maximisation rows are relaxed by a common bound ``t`` and the
    transversality rows by a bound ``tt``; ``t + tt`` is minimised.  The
    reported residual is ``max(t, tt)``.

    Raises
    ------
    RuntimeError
        If the LP fails.
    """
    opts = replace(options, bound=1e4)
    lp = assemble(problem, process, opts, lam=lam, residual_var=True)
    lp.bounds[lp.P] = [-1e4, 1e4]
    obj = np.zeros(lp.layout.size)
    t = lp.layout.blocks["t"]
    tt = lp.layout.blocks["tt"]
    obj[t] = 1.0
    obj[tt] = 1.0
    # a tiny weight on the multiplier size picks the least elaborate fit
    obj[lp.w] = 1e-9
    res = lp.solve(obj)
    if res.status != 0:
        raise RuntimeError(f"multiplier fit failed: {res.message}")
    info = {**lp.info, "hamiltonian_residual": float(res.x[t][0]), "transversality_residual": float(res.x[tt][0])}
    return FitResult(lp.multipliers(res.x), max(float(res.x[t][0]), float(res.x[tt][0])), info)

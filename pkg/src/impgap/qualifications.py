"""Verifiable sufficient conditions for normality and the composite no-gap verdict.

Every check works on a fixed discretised process:

* ``check_cna`` asks whether the hybrid subdifferential at the initial point
  meets the negated initial block of the endpoint normal cone;
* ``check_cqn`` scans boundary contacts and, over a geometric grid of window
  lengths, computes the best margin of the inward (backward) or outward
  (forward) pointing inequalities on the active window;
* ``check_tqn`` combines an interior window at one end with cone
  intersections and LP margins over the endpoint cone.

The forward conditions are the backward ones with every gradient and cone
element negated, which is how they are implemented.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .geometry import (
    ConeHull,
    GeometryError,
    cone_intersection_empty,
    cone_meet_witness,
    hull_cone_distance,
    hybrid_subdiff,
    reachable_gradients,
)
from .model import ExtendedProcess, ProblemSpec
from .pmp import control_samples

LOGGER = logging.getLogger(__name__)

__all__ = [
    "QualificationOptions",
    "QualificationEntry",
    "QualificationReport",
    "Verdict",
    "check_cna",
    "check_cqn",
    "check_tqn",
    "active_window",
    "contact_nodes",
    "check_all",
    "no_gap_verdict",
]

HOLDS, FAILS, INCONCLUSIVE = "holds", "fails", "inconclusive"


@dataclass(frozen=True)
class QualificationOptions:
    """Search grids and thresholds.

    Attributes
    ----------
    eps_divisors : window lengths are ``S / d`` for each divisor.
    delta : a margin must exceed this to count as strictly positive.
    contact_tol : a node touches the boundary when ``max_i h_i >= -contact_tol``.
    window_tol : tolerance of the window predicate (``>= -window_tol``).
    exemption : fraction of window cells allowed to violate an inequality.
    directions : unit control directions used for the impulse terms.
    """

    eps_divisors: tuple = (10, 20, 40, 80, 160, 320)
    delta: float = 1e-4
    contact_tol: float = 1e-7
    window_tol: float = 1e-9
    exemption: float = 0.0
    directions: int = 64


@dataclass
class QualificationEntry:
    name: str
    status: str
    margin: float | None
    witnesses: dict = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return self.status == HOLDS

    def to_json(self) -> dict:
        margin = self.margin
        if margin is not None and not np.isfinite(margin):
            margin = "inf" if margin > 0 else "-inf"
        return {
            "name": self.name,
            "status": self.status,
            "margin": margin,
            "witnesses": _jsonable(self.witnesses),
            "parameters": _jsonable(self.parameters),
            "notes": list(self.notes),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else ("inf" if v > 0 else "-inf")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


@dataclass
class QualificationReport:
    entries: dict = field(default_factory=dict)

    def __getitem__(self, key: str) -> QualificationEntry:
        return self.entries[key]

    def add(self, entry: QualificationEntry) -> None:
        self.entries[entry.name] = entry

    def holds(self, key: str) -> bool:
        return key in self.entries and self.entries[key].holds

    def to_json(self) -> dict:
        return {k: self.entries[k].to_json() for k in sorted(self.entries)}


def _status(margin: float, delta: float) -> str:
    return HOLDS if margin > delta else FAILS


def _params(options: QualificationOptions, S: float) -> dict:
    return {"eps": [S / d for d in options.eps_divisors], "delta": options.delta, "exemption": options.exemption}


# ---------------------------------------------------------------------------
# boundary contacts and windows
# ---------------------------------------------------------------------------


def contact_nodes(problem: ProblemSpec, proc: ExtendedProcess, tol: float = 1e-7) -> np.ndarray:
    """Nodes where some constraint is active (within ``tol``)."""
    if not problem.constraints:
        return np.zeros(0, dtype=int)
    vals = problem.constraint_values(proc.tx)
    return np.flatnonzero(vals.max(axis=1) >= -tol)


def _active_constraints(problem: ProblemSpec, z: np.ndarray, tol: float) -> list[int]:
    return [i for i, h in enumerate(problem.constraints) if float(h(z)) >= -tol]


def _window_cells(proc: ExtendedProcess, s: float, eps: float, direction: str) -> np.ndarray:
    """Cells overlapping ``[s - eps, s]`` (backward) or ``[s, s + eps]`` (forward) with positive length.

    Overlap rather than containment keeps windows shorter than a cell nonempty.
    """
    tol = 1e-12 * max(1.0, proc.S)
    left, right = proc.s[:-1], proc.s[1:]
    if direction == "backward":
        sel = (right > s - eps + tol) & (left < s - tol)
    elif direction == "forward":
        sel = (left < s + eps - tol) & (right > s + tol)
    else:
        raise ValueError("direction must be 'backward' or 'forward'")
    return np.flatnonzero(sel)


def _sign(direction: str) -> float:
    return 1.0 if direction == "backward" else -1.0


def _window_predicate(problem: ProblemSpec, proc: ExtendedProcess, sign: float) -> np.ndarray:
    """``max`` over reachable gradients of ``sign * (xi0 omega0 + xi . F)`` per cell and constraint."""
    F = proc.rates(problem)
    vel = np.column_stack([proc.omega0, F])
    out = np.empty((proc.M, len(problem.constraints)))
    for i, h in enumerate(problem.constraints):
        if h.is_smooth:
            g = h.piece_gradients(proc.tx[:-1])[:, 0, :]
            out[:, i] = sign * np.einsum("kc,kc->k", g, vel)
        else:
            for k in range(proc.M):
                out[k, i] = np.max(sign * reachable_gradients(h, proc.tx[k]) @ vel[k])
    return out


def active_window(
    problem: ProblemSpec,
    proc: ExtendedProcess,
    s: float,
    eps: float,
    direction: str,
    constraints=None,
    window_tol: float = 1e-9,
    predicate: np.ndarray | None = None,
) -> np.ndarray:
    """Cells of the window where the trajectory points outward (backward) or inward (forward).

    A cell ``k`` qualifies when, for every listed constraint, the largest
    (smallest, forward) value of ``xi0 omega0 + xi . F`` over the reachable
    gradients at its left node is ``>= 0`` (``<= 0``).  ``predicate`` may
    carry a precomputed :func:`_window_predicate` table.
    """
    cells = _window_cells(proc, s, eps, direction)
    if constraints is None:
        k = int(np.argmin(np.abs(proc.s - s)))
        constraints = _active_constraints(problem, proc.tx[k], 1e-7)
    if cells.size == 0 or not constraints:
        return cells[:0]
    if predicate is None:
        predicate = _window_predicate(problem, proc, _sign(direction))
    ok = np.all(predicate[np.ix_(cells, constraints)] >= -window_tol, axis=1)
    return cells[ok]


def _robust_min(values: np.ndarray, exemption: float) -> float:
    if values.size == 0:
        return float("inf")
    if exemption <= 0:
        return float(values.min())
    return float(np.quantile(values, exemption, method="lower"))


def _unique_rows(rows: np.ndarray) -> np.ndarray:
    if rows.shape[0] <= 1:
        return rows
    return np.unique(np.round(rows, 12), axis=0)


# ---------------------------------------------------------------------------
# (CNa)
# ---------------------------------------------------------------------------


def _endpoint_cone(problem: ProblemSpec, proc: ExtendedProcess, block: str) -> ConeHull:
    e = problem.endpoint_vector(proc)
    cone = problem.target.normal_cone(e[:-1], 1e-8)
    d = 1 + problem.n
    sl = slice(0, d) if block == "initial" else slice(d, 2 * d)
    return cone.project(sl)


def _hybrid_at(problem: ProblemSpec, z: np.ndarray, tol: float):
    """Union of hybrid subdifferential generators of the active constraints and a degeneracy flag."""
    pts, degenerate = [], False
    for i in _active_constraints(problem, z, tol):
        g = hybrid_subdiff(problem.constraints[i], z)
        degenerate |= g.degenerate
        if not g.empty:
            pts.append(g.points)
    if not pts:
        return np.zeros((0, z.size)), degenerate
    return np.vstack(pts), degenerate


def check_cna(problem: ProblemSpec, proc: ExtendedProcess, options: QualificationOptions = QualificationOptions()) -> QualificationEntry:
    """Whether the hybrid subdifferential at the start avoids the negated initial normal cone."""
    z = proc.tx[0]
    params = {"contact_tol": options.contact_tol}
    notes = []
    if problem.time_independent_constraints:
        notes.append("time-independent constraint: the time component of the gradients vanishes")
    try:
        grads, degenerate = _hybrid_at(problem, z, options.contact_tol)
        if degenerate:
            return QualificationEntry("CNa", INCONCLUSIVE, None, {"initial_point": z}, params, notes + ["vanishing gradient at an active constraint"])
        if grads.shape[0] == 0:
            return QualificationEntry("CNa", HOLDS, float("inf"), {"initial_point": z, "hybrid_subdifferential": "empty"}, params, notes + ["initial point interior: hybrid subdifferential empty"])
        cone = -_endpoint_cone(problem, proc, "initial")
        dist, nearest = hull_cone_distance(grads, cone)
    except GeometryError as exc:
        return QualificationEntry("CNa", INCONCLUSIVE, None, {"initial_point": z}, params, notes + [f"geometry refused: {exc}"])
    status = HOLDS if dist > 1e-9 else FAILS
    witnesses = {"initial_point": z, "gradients": grads, "closest_hull_point": nearest, "distance": dist, "negated_cone": cone.to_json()}
    return QualificationEntry("CNa", status, dist, witnesses, params, notes)


# ---------------------------------------------------------------------------
# (CQn)
# ---------------------------------------------------------------------------


def _impulse_reference(proc: ExtendedProcess, k: int) -> np.ndarray:
    w = proc.omega[k]
    nw = np.linalg.norm(w)
    return w / nw if nw > 1e-14 else np.zeros_like(w)


def _cqn_full_margin(problem, proc, s_idx, cells, constraints, sign, dirs, A) -> tuple[float, dict]:
    """Per-cell margins ``-max(D_k, I_k)`` of the drift and impulse inequalities."""
    z = proc.tx[s_idx]
    xi = np.vstack([sign * reachable_gradients(problem.constraints[i], z) for i in constraints])[:, 1:]
    f_all = problem.drift_at(np.broadcast_to(z, (A.shape[0], z.size)), A)  # (|A|, n)
    G = problem.impulse_at(z)  # (n, m)
    f_bar = problem.drift_at(np.broadcast_to(z, (cells.size, z.size)), proc.alpha[cells])  # (K, n)
    # drift: inf_a max_xi xi . (f(a) - f(alpha_k))
    drift = (xi @ (f_all[None, :, :] - f_bar[:, None, :]).transpose(0, 2, 1)).max(axis=1).min(axis=1)
    ref = np.array([_impulse_reference(proc, k) for k in cells])  # (K, m)
    diff = dirs[None, :, :] - ref[:, None, :]  # (K, D, m)
    imp = np.einsum("gi,ij,kdj->kdg", xi, G, diff).max(axis=2).min(axis=1)
    margins = -np.maximum(drift, imp)
    worst = int(np.argmin(margins)) if margins.size else 0
    info = {}
    if margins.size:
        info = {"worst_cell": int(cells[worst]), "drift_term": float(drift[worst]), "impulse_term": float(imp[worst])}
    return margins, info


def _cqn_primed_margin(problem, proc, s_idx, cells, constraints, sign, dirs, A, eps, direction) -> tuple[np.ndarray, dict]:
    """Per-cell margins with the best replacement control ``(1 - omega0) d, a``."""
    s = proc.s[s_idx]
    tol = 1e-12 * max(1.0, proc.S)
    if direction == "backward":
        sig = np.flatnonzero((proc.s > s - eps + tol) & (proc.s < s - tol))
    else:
        sig = np.flatnonzero((proc.s > s + tol) & (proc.s < s + eps - tol))
    if sig.size == 0:
        sig = np.array([s_idx])
    xi = np.vstack([sign * reachable_gradients(problem.constraints[i], proc.tx[r]) for r in sig for i in constraints])[:, 1:]
    xi = _unique_rows(xi)
    F = proc.rates(problem)
    tx = proc.tx[cells]
    w0 = proc.omega0[cells]
    f = problem.drift_at(tx[:, None, :], A[None, :, :])  # (K, |A|, n)
    G = problem.impulse_at(tx)  # (K, n, m)
    Gd = np.einsum("kij,dj->kdi", G, dirs)  # (K, D, n)
    delta = w0[:, None, None, None] * f[:, None, :, :] + (1.0 - w0)[:, None, None, None] * Gd[:, :, None, :] - F[cells][:, None, None, :]
    vals = np.einsum("gi,kdai->kdag", xi, delta).max(axis=3)  # (K, D, |A|)
    best = vals.reshape(cells.size, -1).min(axis=1)
    return -best, {"window_nodes": int(sig.size)}


def _smooth_margin(problem, z, constraints, sign, dirs, A) -> tuple[float | None, dict]:
    margins = []
    for i in constraints:
        h = problem.constraints[i]
        grads = reachable_gradients(h, z)
        if grads.shape[0] != 1:
            return None, {"constraint": i, "reason": "not differentiable at the contact"}
        gx = sign * grads[0, 1:]
        f = problem.drift_at(np.broadcast_to(z, (A.shape[0], z.size)), A)
        drift = float((f @ gx).min())
        imp = float((dirs @ (problem.impulse_at(z).T @ gx)).min()) if dirs.shape[0] else float("inf")
        margins.append(-max(drift, imp))
    return float(min(margins)), {}


def check_cqn(problem: ProblemSpec, proc: ExtendedProcess, direction: str = "backward", variant: str = "full", options: QualificationOptions = QualificationOptions()) -> QualificationEntry:
    """Inward/outward pointing constraint qualification at every boundary contact.

    ``variant`` is ``full``, ``primed`` (a replacement control acting on the
    whole window) or ``smooth`` (plain gradient inequalities at the contact).
    The reported margin is the smallest over contacts of the best margin
    found over the window lengths.
    """
    if variant not in ("full", "primed", "smooth"):
        raise ValueError("variant must be full, primed or smooth")
    sign = _sign(direction)
    suffix = "b" if direction == "backward" else "f"
    name = f"CQn_{suffix}" + {"full": "", "primed": "_primed", "smooth": "_smooth"}[variant]
    params = _params(options, proc.S)
    params["variant"] = variant
    nodes = contact_nodes(problem, proc, options.contact_tol)
    # contacts in ]0, S] (backward) or [0, S[ (forward)
    nodes = nodes[nodes > 0] if direction == "backward" else nodes[nodes < proc.M]
    if nodes.size == 0:
        return QualificationEntry(name, HOLDS, float("inf"), {"contacts": []}, params, ["no boundary contacts: holds vacuously"])
    dirs = control_samples(problem, options.directions)
    A = problem.controls.samples()
    notes = []
    if variant == "full" and not problem.drift_uses_control:
        notes.append("drift does not depend on the ordinary control: the drift inequality cannot hold; see the primed variant")
    per_contact = []
    worst = float("inf")
    degenerate = False
    predicate = _window_predicate(problem, proc, sign) if variant != "smooth" else None
    for k in nodes:
        z = proc.tx[k]
        act = _active_constraints(problem, z, options.contact_tol)
        for i in act:
            g = reachable_gradients(problem.constraints[i], z)
            degenerate |= bool(np.any(np.linalg.norm(g, axis=1) <= 1e-12))
        if variant == "smooth":
            m, info = _smooth_margin(problem, z, act, sign, dirs, A)
            if m is None:
                return QualificationEntry(name, INCONCLUSIVE, None, {"contact_node": int(k), **info}, params, notes + ["smooth variant needs a differentiable constraint"])
            per_contact.append({"s": float(proc.s[k]), "active": act, "margin": m})
            worst = min(worst, m)
            continue
        best, best_eps, best_info = -float("inf"), None, {}
        for d in options.eps_divisors:
            eps = proc.S / d
            cells = active_window(problem, proc, proc.s[k], eps, direction, act, options.window_tol, predicate)
            if cells.size == 0:
                m, info = float("inf"), {"window": "empty"}
            elif variant == "full":
                margins, info = _cqn_full_margin(problem, proc, k, cells, act, sign, dirs, A)
                m = _robust_min(margins, options.exemption)
            else:
                margins, info = _cqn_primed_margin(problem, proc, k, cells, act, sign, dirs, A, eps, direction)
                m = _robust_min(margins, options.exemption)
            if m > best:
                best, best_eps, best_info = m, eps, {**info, "window_cells": int(cells.size)}
        per_contact.append({"s": float(proc.s[k]), "active": act, "margin": best, "eps": best_eps, **best_info})
        worst = min(worst, best)
    if degenerate:
        return QualificationEntry(name, INCONCLUSIVE, None, {"contacts": per_contact[:20]}, params, notes + ["vanishing gradient at a contact"])
    witnesses = {
        "contacts": len(per_contact),
        "worst_contact": min(per_contact, key=lambda c: c["margin"]),
        "first_contacts": per_contact[:5],
    }
    return QualificationEntry(name, _status(worst, options.delta), worst, witnesses, params, notes)


# ---------------------------------------------------------------------------
# (TQn)
# ---------------------------------------------------------------------------


def _cone_rows(cone: ConeHull):
    return cone.generators, cone.lineality


def _minimax_margin(K: ConeHull, normalize: np.ndarray, rows: np.ndarray, const: np.ndarray) -> tuple[float, np.ndarray | None]:
    """``max`` over ``zeta`` in ``K`` with ``max_{c in normalize} |zeta_c| = 1`` of ``min_r (rows_r . zeta + const_r zeta_0)``.

    ``const`` multiplies the first coordinate (the time component).  Returns
    ``-inf`` when no admissible ``zeta`` exists.
    """
    gens, lin = _cone_rows(K)
    d = K.dim
    ng, nl = gens.shape[0], lin.shape[0]
    best, arg = -float("inf"), None
    if ng + nl == 0:
        return best, arg
    # variables: generator coefs (>= 0), lineality coefs (free), t
    nvar = ng + nl + 1
    Z = np.hstack([gens.T, lin.T])  # zeta = Z @ coefs
    R = rows.copy()
    R[:, 0] += const
    A_t = np.hstack([-(R @ Z), np.ones((R.shape[0], 1))])  # t - R zeta <= 0
    box = Z[normalize]
    A_box = np.vstack([np.hstack([box, np.zeros((box.shape[0], 1))]), np.hstack([-box, np.zeros((box.shape[0], 1))])])
    A_ub = np.vstack([A_t, A_box])
    b_ub = np.concatenate([np.zeros(R.shape[0]), np.ones(2 * box.shape[0])])
    bounds = [(0, None)] * ng + [(None, None)] * nl + [(None, None)]
    cost = np.zeros(nvar)
    cost[-1] = -1.0
    for j, c in enumerate(normalize):
        for s in (1.0, -1.0):
            A_eq = np.zeros((1, nvar))
            A_eq[0, : ng + nl] = s * Z[c]
            res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0], bounds=bounds, method="highs")
            if res.status == 0 and -res.fun > best:
                best, arg = -float(res.fun), Z @ res.x[:-1]
            elif res.status not in (0, 2):
                raise GeometryError(f"endpoint margin LP failed: {res.message}")
    return best, arg


def check_tqn(problem: ProblemSpec, proc: ExtendedProcess, direction: str = "backward", options: QualificationOptions = QualificationOptions()) -> QualificationEntry:
    """Endpoint qualification at the final (backward) or initial (forward) point."""
    suffix = "b" if direction == "backward" else "f"
    name = f"TQn_{suffix}"
    sign = _sign(direction)
    params = _params(options, proc.S)
    n = problem.n
    node = proc.M if direction == "backward" else 0
    z = proc.tx[node]
    vals = problem.constraint_values(proc.tx).max(axis=1) if problem.constraints else np.full(proc.M + 1, -np.inf)
    # interior window: [S - eps, S[ or ]0, eps]
    window_eps = None
    for d in options.eps_divisors:
        eps = proc.S / d
        if direction == "backward":
            sel = (proc.s >= proc.S - eps) & (np.arange(proc.M + 1) < proc.M)
        else:
            sel = (proc.s <= eps) & (np.arange(proc.M + 1) > 0)
        if np.all(vals[sel] < -options.contact_tol):
            window_eps = eps
            break
    witnesses: dict = {"endpoint": z, "interior_window": window_eps}
    if window_eps is None:
        return QualificationEntry(name, FAILS, -float("inf"), witnesses, params, ["no interior window next to the endpoint"])
    try:
        grads, degenerate = _hybrid_at(problem, z, options.contact_tol)
        if degenerate:
            return QualificationEntry(name, INCONCLUSIVE, None, witnesses, params, ["vanishing gradient at the endpoint"])
        N = _endpoint_cone(problem, proc, "final" if direction == "backward" else "initial")
        H = ConeHull(1 + n, grads) if grads.shape[0] else ConeHull.zero(1 + n)
        K = N + H
        Ks = ConeHull(K.dim, sign * K.generators, K.lineality)
        # (a): (-N minus 0) meets the hybrid subdifferential?
        incl_a = True if grads.shape[0] == 0 else cone_intersection_empty(H, -N)
        A = problem.controls.samples()
        f = problem.drift_at(np.broadcast_to(z, (A.shape[0], z.size)), A)
        rows_a = np.hstack([np.zeros((A.shape[0], 1)), f])
        worst_a, zeta_a = _minimax_margin(Ks, np.arange(1 + n), rows_a, np.ones(A.shape[0]))
        margin_a = -worst_a
        holds_a = incl_a and margin_a > options.delta
        # (b): x-projections, side conditions and impulse directions
        Nx = N.project(slice(1, 1 + n))
        Hx = ConeHull(n, grads[:, 1:]) if grads.shape[0] else ConeHull.zero(n)
        incl_b = True if grads.shape[0] == 0 else cone_intersection_empty(Hx, -Nx)
        dirs = control_samples(problem, options.directions)
        G = problem.impulse_at(z)
        rows_b = np.hstack([np.zeros((dirs.shape[0], 1)), dirs @ G.T])
        worst_b, zeta_b = _minimax_margin(Ks, np.arange(1, 1 + n), rows_b, np.zeros(dirs.shape[0]))
        exists_b = np.isfinite(worst_b)
        clock_ok = bool(proc.y0[-1] > proc.y0[0] + 1e-12)
        var_ok = bool(proc.nu[-1] < problem.K)
        if not exists_b:
            margin_b, holds_b = float("inf"), incl_b
        else:
            margin_b = -worst_b if (clock_ok and var_ok) else -float("inf")
            holds_b = incl_b and margin_b > options.delta
    except GeometryError as exc:
        return QualificationEntry(name, INCONCLUSIVE, None, witnesses, params, [f"geometry refused: {exc}"])
    witnesses.update(
        {
            "cone": K.to_json(),
            "case_a": {"inclusion_empty": incl_a, "margin": margin_a, "worst_zeta": None if zeta_a is None else sign * zeta_a, "holds": holds_a},
            "case_b": {
                "inclusion_empty": incl_b,
                "margin": margin_b,
                "worst_zeta": None if zeta_b is None else sign * zeta_b,
                "clock_advances": clock_ok,
                "variation_below_bound": var_ok,
                "holds": holds_b,
            },
        }
    )
    margin = max(margin_a if incl_a else -float("inf"), margin_b if incl_b else -float("inf"))
    status = HOLDS if (holds_a or holds_b) else FAILS
    return QualificationEntry(name, status, margin, witnesses, params, [])


# ---------------------------------------------------------------------------
# composite verdict
# ---------------------------------------------------------------------------


def check_all(problem: ProblemSpec, proc: ExtendedProcess, options: QualificationOptions = QualificationOptions()) -> QualificationReport:
    """Every condition in both directions and all variants."""
    report = QualificationReport()
    report.add(check_cna(problem, proc, options))
    for direction in ("backward", "forward"):
        for variant in ("full", "primed", "smooth"):
            report.add(check_cqn(problem, proc, direction, variant, options))
        report.add(check_tqn(problem, proc, direction, options))
    return report


@dataclass
class Verdict:
    verdict: str  # NO-GAP-CERTIFIED, GAP-POSSIBLE, INCONCLUSIVE
    route: str | None
    premises: dict
    certificate: dict | None = None

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "route": self.route, "premises": self.premises, "certificate": self.certificate}


def _cqn_holds(report: QualificationReport, suffix: str) -> str | None:
    for variant in ("", "_primed", "_smooth"):
        key = f"CQn_{suffix}{variant}"
        if report.holds(key):
            return key
    return None


def no_gap_verdict(problem: ProblemSpec, proc: ExtendedProcess, report: QualificationReport, normality=None) -> Verdict:
    """Compose the qualification chain and the normality verdict.

    Never asserts a gap: abnormality only makes one possible.
    """
    if report.holds("CNa"):
        for suffix in ("b", "f"):
            cqn = _cqn_holds(report, suffix)
            tqn = f"TQn_{suffix}"
            if cqn and report.holds(tqn):
                premises = {k: report[k].to_json() for k in ("CNa", cqn, tqn)}
                return Verdict("NO-GAP-CERTIFIED", f"qualifications-{suffix}", premises)
    if normality is not None and normality.verdict == "normal":
        return Verdict("NO-GAP-CERTIFIED", "normality", {"normality": normality.to_json()})
    if normality is not None and normality.verdict == "abnormal":
        return Verdict("GAP-POSSIBLE", None, {"normality": normality.to_json()}, normality.to_json().get("certificate"))
    premises = {"qualifications": report.to_json()}
    if normality is not None:
        premises["normality"] = normality.to_json()
    return Verdict("INCONCLUSIVE", None, premises)

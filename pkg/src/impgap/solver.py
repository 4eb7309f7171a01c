"""Direct transcription of the extended problem and an augmented-Lagrangian solver.

Decision variables are the horizon ``S``, the initial point ``(y0, y)(0)`` and
per-cell controls ``(rho_k, c_k, alpha_k)``: ``rho_k = |omega_k|`` lies in
``[0, 1 - eps]``, ``omega0_k = 1 - rho_k`` and ``omega_k = rho_k B c_k / |B c_k|``
where the columns of ``B`` span the control cone.  Every reconstructed control
is therefore admissible exactly, whatever the optimizer does.

The grid is uniform, ``s_k = k S / M``.  Gradients come from the compiled
adjoint sweep in :mod:`impgap._kernels`; the inner problem is solved by
L-BFGS-B with simple bounds.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .extension import strictify
from .fields import PolyMap
from .model import (
    ExtendedProcess,
    FeasibilityReport,
    ProblemSpec,
    cost,
    d_infty,
    extended_graph,
    feasibility,
    integrate,
)

LOGGER = logging.getLogger(__name__)

__all__ = ["SolveOptions", "SolveResult", "Transcription", "NoFeasiblePointError", "solve", "solve_strict"]


@dataclass(frozen=True)
class SolveOptions:
    """Settings of the transcription and of the augmented-Lagrangian loop.

    Attributes
    ----------
    cells : number of grid cells ``M``.
    multistart : number of random starts on top of any supplied guesses.
    seed : base seed; start ``i`` uses ``default_rng([seed, i])``.
    penalty_growth : factor applied to the penalty when violation stalls.
    initial_penalty : first penalty weight.
    smoothing : unused under the ``(rho, d)`` parameterization, kept for completeness.
    kkt_tol, feas_tol : stopping tolerances (projected gradient, constraint violation).
    eps : lower bound on the clock rate (0 means unrestricted).
    horizon_cap : upper bound on ``S``; ``None`` derives one from the target.
    max_outer, max_inner : iteration caps.
    report_tol : feasibility tolerance used to call a result feasible.
    """

    cells: int = 400
    multistart: int = 16
    seed: int = 0
    penalty_growth: float = 10.0
    initial_penalty: float = 10.0
    smoothing: float = 0.0
    kkt_tol: float = 1e-6
    feas_tol: float = 1e-8
    eps: float = 0.0
    horizon_cap: float | None = None
    max_outer: int = 20
    max_inner: int = 1500
    report_tol: float = 1e-6

    def __post_init__(self):
        if self.cells < 1 or self.multistart < 0:
            raise ValueError("cells must be positive and multistart nonnegative")
        if not 0.0 <= self.eps < 1.0:
            raise ValueError("eps must lie in [0, 1)")
        if min(self.penalty_growth, self.initial_penalty, self.kkt_tol, self.feas_tol) <= 0:
            raise ValueError("penalties and tolerances must be positive")


@dataclass
class SolveResult:
    process: ExtendedProcess
    objective: float
    feasibility: FeasibilityReport
    multipliers: dict
    diagnostics: dict
    status: str

    @property
    def feasible(self) -> bool:
        return self.status == "ok"

    def to_json(self) -> dict:
        mult = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.multipliers.items()}
        return {
            "status": self.status,
            "objective": float(self.objective),
            "S": self.process.S,
            "cells": self.process.M,
            "endpoint": {
                "y0": [float(self.process.y0[0]), float(self.process.y0[-1])],
                "y_initial": self.process.y[0].tolist(),
                "y_final": self.process.y[-1].tolist(),
                "nu_final": float(self.process.nu[-1]),
            },
            "feasibility": self.feasibility.to_json(),
            "multipliers": mult,
            "diagnostics": self.diagnostics,
        }


class NoFeasiblePointError(RuntimeError):
    """Every start ended above the violation tolerance; ``result`` holds the least-violating one."""

    def __init__(self, result: SolveResult):
        super().__init__(f"no feasible point found (best violation {result.feasibility.worst:.3e})")
        self.result = result


_BLOWUP = 1e30


def _horizon_span(problem: ProblemSpec) -> float:
    z = problem.target.project(np.zeros(problem.target.dim))
    n = problem.n
    return float(abs(z[1 + n] - z[0]))


class Transcription:
    """Finite-dimensional program for one problem, grid size and trust region."""

    def __init__(self, problem: ProblemSpec, options: SolveOptions, anchor: ExtendedProcess | None = None, delta: float | None = None):
        self.problem = problem
        self.options = options
        n, m, M = problem.n, problem.m, options.cells
        self.n, self.m, self.M = n, m, M
        self.B, coef_lb = problem.cone.param_basis()
        self.r = self.B.shape[1]
        self.fallback = self.B.sum(axis=1) if self.r else np.zeros(m)
        A = problem.controls
        self.box_controls = not A.is_finite
        self.q = problem.q
        span = _horizon_span(problem)
        cap = options.horizon_cap
        if cap is None:
            reach = problem.K if np.isfinite(problem.K) else 1.0
            cap = 10.0 * (span + reach) if span + reach > 0 else 10.0
        self.span = span
        self.S_bounds = (1e-6, float(cap))

        # variable layout
        self.i_S = 0
        self.sl_init = slice(1, 2 + n)
        self.sl_rho = slice(2 + n, 2 + n + M)
        self.sl_coef = slice(self.sl_rho.stop, self.sl_rho.stop + M * self.r)
        na = M * self.q if self.box_controls else 0
        self.sl_alpha = slice(self.sl_coef.stop, self.sl_coef.stop + na)
        self.nvar = self.sl_alpha.stop
        rho_hi = 1.0 - options.eps if self.r else 0.0
        bounds = [self.S_bounds] + [(None, None)] * (1 + n) + [(0.0, rho_hi)] * M
        bounds += [(None if np.isinf(lb) else float(lb), None) for lb in coef_lb] * M
        if self.box_controls:
            bounds += [(float(lo), float(hi)) for lo, hi in zip(A.lo, A.hi)] * M
        self.bounds = bounds
        self.lo = np.array([-np.inf if b[0] is None else b[0] for b in bounds])
        self.hi = np.array([np.inf if b[1] is None else b[1] for b in bounds])
        self.alpha_index = np.zeros(M, dtype=np.int64)

        # constraint data
        pieces = [p for h in problem.constraints for p in h.pieces]
        self.path = PolyMap(pieces) if pieces else None
        self.n_path = len(pieces)
        rows = problem.target.smooth_constraints()
        self.end_eq = PolyMap([g for kind, g in rows if kind == "eq"]) if any(k == "eq" for k, _ in rows) else None
        self.end_in = PolyMap([g for kind, g in rows if kind == "ineq"]) if any(k == "ineq" for k, _ in rows) else None
        self.n_eq = self.end_eq.dim if self.end_eq else 0
        self.n_in_end = self.end_in.dim if self.end_in else 0
        self.has_K = bool(np.isfinite(problem.K))
        self.anchor = anchor
        self.delta = delta
        self.kernel_args = (*problem.drift.arrays(), *problem.impulse.arrays())

    # ------------------------------------------------------------------
    # controls
    def unpack(self, x: np.ndarray):
        M, r = self.M, self.r
        S = x[self.i_S]
        init = x[self.sl_init]
        rho = x[self.sl_rho]
        coef = x[self.sl_coef].reshape(M, r)
        if self.box_controls:
            alpha = x[self.sl_alpha].reshape(M, self.q)
        else:
            alpha = self.problem.controls.points[self.alpha_index]
        return S, init, rho, coef, alpha

    def directions(self, coef: np.ndarray):
        if self.r == 0:
            return np.zeros((self.M, self.m)), np.ones(self.M)
        v = coef @ self.B.T
        norms = np.linalg.norm(v, axis=1)
        small = norms <= 1e-12
        if np.any(small):
            v = v.copy()
            v[small] = self.fallback
            norms = np.where(small, np.linalg.norm(self.fallback), norms)
        return v / norms[:, None], norms

    def controls(self, x: np.ndarray):
        S, init, rho, coef, alpha = self.unpack(x)
        d, _ = self.directions(coef)
        omega = rho[:, None] * d
        omega0 = 1.0 - rho
        return S, init, omega0, omega, rho, alpha

    def process(self, x: np.ndarray) -> ExtendedProcess:
        S, init, omega0, omega, rho, alpha = self.controls(x)
        s = np.linspace(0.0, S, self.M + 1)
        # rho is |omega| exactly; integrate() recomputes it from omega
        return integrate(self.problem, s, omega0, omega, alpha, init[0], init[1:], check=False)

    # ------------------------------------------------------------------
    # constraints
    def _endpoint(self, Z: np.ndarray) -> np.ndarray:
        n = self.n
        return np.concatenate([Z[0, : 1 + n], Z[-1, : 1 + n], [Z[-1, n + 1]]])

    def _trust(self, Z: np.ndarray, S: float):
        """Per-node trust-region values and their derivatives."""
        a = self.anchor
        n = self.n
        s = np.linspace(0.0, S, self.M + 1)
        vals = np.column_stack([a.y, a.nu])
        zbar = np.column_stack([np.interp(s, a.s, vals[:, j]) for j in range(n + 1)])
        slopes = np.diff(vals, axis=0) / a.ds[:, None]
        cell = np.clip(np.searchsorted(a.s, s, side="right") - 1, 0, a.M - 1)
        dz_ds = np.where((s < a.s[-1])[:, None], slopes[cell], 0.0)
        diff = Z[:, 1:] - zbar
        eta = 1e-12
        nd = np.sqrt(np.sum(diff**2, axis=1) + eta)
        e1 = Z[0, 0] - a.y0[0]
        e2 = Z[-1, 0] - a.y0[-1]
        a1, a2 = np.sqrt(e1**2 + eta), np.sqrt(e2**2 + eta)
        value = a1 + a2 + nd - self.delta
        d_diff = diff / nd[:, None]
        d_S = -np.sum(d_diff * dz_ds, axis=1) * np.arange(self.M + 1) / self.M
        return value, d_diff, e1 / a1, e2 / a2, d_S

    def constraint_values(self, x: np.ndarray):
        """Equality residuals and inequality values (feasible iff eq = 0, ineq <= 0)."""
        Z, S = self._forward(x)
        eq, ineq = [], []
        e = self._endpoint(Z)
        if self.path is not None:
            ineq.append(self.path(Z[:, : 1 + self.n]).ravel())
        if self.end_eq is not None:
            eq.append(self.end_eq(e[:-1]))
        if self.end_in is not None:
            ineq.append(self.end_in(e[:-1]))
        if self.has_K:
            ineq.append(np.array([e[-1] - self.problem.K]))
        if self.anchor is not None:
            ineq.append(self._trust(Z, S)[0])
        eq = np.concatenate(eq) if eq else np.zeros(0)
        ineq = np.concatenate(ineq) if ineq else np.zeros(0)
        return eq, ineq

    def n_constraints(self) -> tuple[int, int]:
        n_in = self.n_path * (self.M + 1) + self.n_in_end + int(self.has_K) + (self.M + 1 if self.anchor is not None else 0)
        return self.n_eq, n_in

    def _forward(self, x):
        S, init, omega0, omega, rho, alpha = self.controls(x)
        ds = np.full(self.M, S / self.M)
        z0 = np.concatenate([init, [0.0]])
        Z = _kernels.forward(z0, ds, omega0, np.ascontiguousarray(omega), rho, np.ascontiguousarray(alpha, dtype=float), *self.kernel_args, self.n, self.m)
        return Z, S

    # ------------------------------------------------------------------
    # augmented Lagrangian value and gradient
    def evaluate(self, x: np.ndarray, lam_eq: np.ndarray, lam_in: np.ndarray, mu: float, want_costate: bool = False):
        """Augmented Lagrangian (plain Lagrangian when ``mu == 0``) and its gradient."""
        with np.errstate(all="ignore"):
            out = self._evaluate(x, lam_eq, lam_in, mu, want_costate)
        if not (np.isfinite(out[0]) and np.all(np.isfinite(out[1]))):
            # trajectories that blow up: a large finite value keeps the line search backtracking
            grad = np.nan_to_num(out[1], nan=0.0, posinf=1e20, neginf=-1e20)
            return (_BLOWUP, grad, *out[2:])
        return out

    def _evaluate(self, x, lam_eq, lam_in, mu, want_costate):
        n, M = self.n, self.M
        S, init, rho, coef, alpha = self.unpack(x)
        d, vnorm = self.directions(coef)
        omega = np.ascontiguousarray(rho[:, None] * d)
        omega0 = 1.0 - rho
        alpha = np.ascontiguousarray(alpha, dtype=float)
        ds = np.full(M, S / M)
        z0 = np.concatenate([init, [0.0]])
        Z = _kernels.forward(z0, ds, omega0, omega, rho, alpha, *self.kernel_args, n, self.m)
        e = self._endpoint(Z)
        gZ = np.zeros_like(Z)
        g_e = self.problem.cost.grad(e)
        value = float(self.problem.cost(e))
        g_S = 0.0

        def eq_term(c, lam):
            return float(lam @ c + 0.5 * mu * c @ c), lam + mu * c

        def in_term(c, lam):
            if mu == 0.0:
                return float(lam @ c), lam.copy()
            shifted = np.maximum(0.0, lam + mu * c)
            return float((shifted @ shifted - lam @ lam) / (2.0 * mu)), shifted

        i_eq = i_in = 0
        path_weights = None
        if self.path is not None:
            tx = Z[:, : 1 + n]
            c = self.path(tx).ravel()
            k = c.size
            v, w = in_term(c, lam_in[i_in:i_in + k])
            value += v
            path_weights = w.reshape(M + 1, self.n_path)
            gZ[:, : 1 + n] += np.einsum("kp,kpc->kc", path_weights, self.path.jac(tx))
            i_in += k
        ge = np.zeros_like(e)
        eq_weights = in_weights = None
        if self.end_eq is not None:
            c = self.end_eq(e[:-1])
            v, eq_weights = eq_term(c, lam_eq[i_eq:i_eq + c.size])
            value += v
            ge[:-1] += eq_weights @ self.end_eq.jac(e[:-1])
            i_eq += c.size
        if self.end_in is not None:
            c = self.end_in(e[:-1])
            v, in_weights = in_term(c, lam_in[i_in:i_in + c.size])
            value += v
            ge[:-1] += in_weights @ self.end_in.jac(e[:-1])
            i_in += c.size
        var_weight = 0.0
        if self.has_K:
            c = np.array([e[-1] - self.problem.K])
            v, w = in_term(c, lam_in[i_in:i_in + 1])
            value += v
            var_weight = float(w[0])
            ge[-1] += var_weight
            i_in += 1
        if self.anchor is not None:
            c, d_diff, d1, d2, d_S = self._trust(Z, S)
            v, w = in_term(c, lam_in[i_in:i_in + c.size])
            value += v
            gZ[:, 1:] += w[:, None] * d_diff
            tot = float(w.sum())
            ge[0] += tot * d1
            ge[1 + n] += tot * d2
            g_S += float(w @ d_S)
            i_in += c.size
        g_e = g_e + ge
        gZ[0, : 1 + n] += g_e[: 1 + n]
        gZ[M, : 1 + n] += g_e[1 + n: 2 + 2 * n]
        gZ[M, n + 1] += g_e[-1]

        lam, g_w0, g_w, g_r, g_alpha, g_ds = _kernels.backward(Z, ds, omega0, omega, rho, alpha, gZ, *self.kernel_args, n, self.m)
        grad = np.zeros(self.nvar)
        grad[self.i_S] = g_S + g_ds.sum() / M
        grad[self.sl_init] = lam[0, : 1 + n]
        g_dir = np.einsum("kj,kj->k", g_w, d)
        grad[self.sl_rho] = -g_w0 + g_r + g_dir
        if self.r:
            tang = g_w - g_dir[:, None] * d
            gc = (rho / vnorm)[:, None] * (tang @ self.B)
            grad[self.sl_coef] = gc.ravel()
        if self.box_controls:
            grad[self.sl_alpha] = g_alpha.ravel()
        if not want_costate:
            return value, grad
        extras = {
            "costate": lam,
            "path": path_weights,
            "endpoint_eq": eq_weights,
            "endpoint_ineq": in_weights,
            "variation": var_weight,
            "Z": Z,
        }
        return value, grad, extras

    def projected_gradient(self, x: np.ndarray, grad: np.ndarray) -> float:
        return float(np.max(np.abs(x - np.clip(x - grad, self.lo, self.hi))))

    # ------------------------------------------------------------------
    # starting points
    def encode(self, proc: ExtendedProcess, rng: np.random.Generator) -> np.ndarray:
        """Variables reproducing ``proc`` resampled onto the uniform grid."""
        M = self.M
        x = np.zeros(self.nvar)
        x[self.i_S] = np.clip(proc.S, *self.S_bounds)
        x[self.sl_init] = np.concatenate([[proc.y0[0]], proc.y[0]])
        mids = (np.arange(M) + 0.5) * proc.S / M
        cells = np.clip(np.searchsorted(proc.s, mids, side="right") - 1, 0, proc.M - 1)
        w = proc.omega[cells]
        rho = np.clip(np.linalg.norm(w, axis=1), 0.0, 1.0 - self.options.eps if self.r else 0.0)
        x[self.sl_rho] = rho
        if self.r:
            coef = np.zeros((M, self.r))
            for k in range(M):
                if np.linalg.norm(w[k]) > 1e-14:
                    coef[k] = self._coefficients(w[k] / np.linalg.norm(w[k]))
                else:
                    coef[k] = self._random_coef(rng)
            x[self.sl_coef] = coef.ravel()
        alpha = proc.alpha[cells]
        if self.box_controls:
            x[self.sl_alpha] = np.clip(alpha, self.problem.controls.lo, self.problem.controls.hi).ravel()
        else:
            pts = self.problem.controls.points
            self.alpha_index = np.argmin(np.linalg.norm(alpha[:, None, :] - pts[None], axis=2), axis=1)
        return x

    def _coefficients(self, direction: np.ndarray) -> np.ndarray:
        kind = self.problem.cone.kind
        if kind == "full":
            return direction.copy()
        if kind == "orthant":
            return np.maximum(direction, 0.0)
        from scipy.optimize import nnls

        coef, _ = nnls(self.B, direction)
        return coef

    def _random_coef(self, rng: np.random.Generator) -> np.ndarray:
        c = rng.standard_normal(self.r)
        if self.problem.cone.kind != "full":
            c = np.abs(c)
        return c

    def random_start(self, rng: np.random.Generator) -> np.ndarray:
        M, n = self.M, self.n
        x = np.zeros(self.nvar)
        lo, hi = self.S_bounds
        base = max(self.span, 0.5)
        x[self.i_S] = np.clip(rng.uniform(1.0, 2.5) * base, lo, hi)
        z = self.problem.target.project(rng.standard_normal(self.problem.target.dim))
        x[self.sl_init] = z[: 1 + n]
        blocks = int(rng.integers(1, 5))
        edges = np.sort(rng.choice(np.arange(1, M), size=min(blocks - 1, max(M - 1, 0)), replace=False)) if M > 1 else []
        owner = np.searchsorted(edges, np.arange(M), side="right")
        rho_hi = 1.0 - self.options.eps if self.r else 0.0
        rho_b = rng.uniform(0.0, rho_hi, size=blocks)
        x[self.sl_rho] = rho_b[owner]
        if self.r:
            coef_b = np.array([self._random_coef(rng) for _ in range(blocks)])
            x[self.sl_coef] = coef_b[owner].ravel()
        if self.box_controls:
            A = self.problem.controls
            a_b = rng.uniform(A.lo, A.hi, size=(blocks, self.q))
            x[self.sl_alpha] = a_b[owner].ravel()
        else:
            k = self.problem.controls.points.shape[0]
            self.alpha_index = rng.integers(0, k, size=blocks)[owner]
        return x

    def switch_controls(self, x: np.ndarray, costate: np.ndarray, Z: np.ndarray) -> bool:
        """Pick, cell by cell, the listed control that minimises the adjoint-weighted drift."""
        if self.box_controls:
            return False
        pts = self.problem.controls.points
        if pts.shape[0] <= 1:
            return False
        tx = Z[:-1, : 1 + self.n]
        f = self.problem.drift_at(tx[:, None, :], pts[None, :, :])
        score = np.einsum("ki,kai->ka", costate[1:, 1: 1 + self.n], f)
        best = np.argmin(score, axis=1)
        changed = bool(np.any(best != self.alpha_index))
        self.alpha_index = best
        return changed


def _violation(eq: np.ndarray, ineq: np.ndarray) -> float:
    v = 0.0
    if eq.size:
        v = max(v, float(np.max(np.abs(eq))))
    if ineq.size:
        v = max(v, float(np.max(ineq)))
    return max(v, 0.0)


@dataclass
class _StartOutcome:
    index: int
    origin: str
    x: np.ndarray
    alpha_index: np.ndarray
    objective: float
    violation: float
    kkt: float
    history: list = field(default_factory=list)
    lam_eq: np.ndarray | None = None
    lam_in: np.ndarray | None = None


def _run_start(tr: Transcription, x0: np.ndarray, index: int, origin: str) -> _StartOutcome:
    opts = tr.options
    n_eq, n_in = tr.n_constraints()
    lam_eq, lam_in = np.zeros(n_eq), np.zeros(n_in)
    mu = opts.initial_penalty
    x = np.clip(x0, tr.lo, tr.hi)
    history = []
    best_feasible = np.inf
    best = None
    prev_viol = np.inf
    for outer in range(opts.max_outer):
        res = minimize(
            tr.evaluate,
            x,
            args=(lam_eq, lam_in, mu),
            jac=True,
            method="L-BFGS-B",
            bounds=tr.bounds,
            options={"maxiter": opts.max_inner, "maxfun": 2 * opts.max_inner, "ftol": 1e-15, "gtol": 1e-11, "maxcor": 20},
        )
        x = res.x
        with np.errstate(all="ignore"):
            eq, ineq = tr.constraint_values(x)
        if not (np.all(np.isfinite(eq)) and np.all(np.isfinite(ineq))):
            eq = np.nan_to_num(eq, nan=_BLOWUP, posinf=_BLOWUP, neginf=-_BLOWUP)
            ineq = np.nan_to_num(ineq, nan=_BLOWUP, posinf=_BLOWUP, neginf=-_BLOWUP)
        viol = _violation(eq, ineq)
        with np.errstate(all="ignore"):
            obj = float(tr.problem.cost(tr._endpoint(tr._forward(x)[0])))
        obj = obj if np.isfinite(obj) else _BLOWUP
        kkt = tr.projected_gradient(x, res.jac)
        lam_eq = lam_eq + mu * eq
        lam_in = np.maximum(0.0, lam_in + mu * ineq)
        compl = float(np.max(np.abs(lam_in * np.minimum(ineq, 0.0)))) if ineq.size else 0.0
        kkt = max(kkt, compl)
        if viol <= opts.feas_tol and obj < best_feasible:
            best_feasible = obj
            best = (x.copy(), tr.alpha_index.copy(), obj, viol, kkt, lam_eq.copy(), lam_in.copy())
        history.append({"outer": outer, "objective": obj, "violation": viol, "penalty": mu, "kkt": kkt, "best_feasible": best_feasible if np.isfinite(best_feasible) else None})
        if tr.problem.controls.is_finite and tr.problem.controls.points.shape[0] > 1:
            _, _, extra = tr.evaluate(x, lam_eq, lam_in, 0.0, want_costate=True)
            if tr.switch_controls(x, extra["costate"], extra["Z"]):
                continue
        if viol <= opts.feas_tol and kkt <= opts.kkt_tol:
            break
        if viol > 0.25 * prev_viol:
            mu = min(mu * opts.penalty_growth, 1e9)
        prev_viol = viol
    feasible_track = [h["best_feasible"] for h in history if h["best_feasible"] is not None]
    assert all(b <= a for a, b in zip(feasible_track, feasible_track[1:])), "best feasible objective increased"
    if best is not None:
        xb, ab, obj, viol, kkt, le, li = best
        return _StartOutcome(index, origin, xb, ab, obj, viol, kkt, history, le, li)
    return _StartOutcome(index, origin, x, tr.alpha_index.copy(), obj, viol, kkt, history, lam_eq, lam_in)


def _rank(out: _StartOutcome, tol: float):
    # feasible starts first by objective, then everything else by violation
    if out.violation <= tol:
        return (0, out.objective, out.violation, out.index)
    return (1, out.violation, out.objective, out.index)


def _finish(tr: Transcription, outcomes: list[_StartOutcome]) -> SolveResult:
    opts = tr.options
    ranked = sorted(outcomes, key=lambda o: _rank(o, opts.feas_tol))
    best = ranked[0]
    tr.alpha_index = best.alpha_index
    proc = tr.process(best.x)
    _, _, extra = tr.evaluate(best.x, best.lam_eq, best.lam_in, 0.0, want_costate=True)
    report = feasibility(tr.problem, proc)
    status = "ok" if report.feasible(opts.report_tol) else "no-feasible-point"
    multipliers = {
        "costate": extra["costate"],
        "path": extra["path"] if extra["path"] is not None else np.zeros((tr.M + 1, 0)),
        "endpoint_eq": extra["endpoint_eq"] if extra["endpoint_eq"] is not None else np.zeros(0),
        "endpoint_ineq": extra["endpoint_ineq"] if extra["endpoint_ineq"] is not None else np.zeros(0),
        "variation": extra["variation"],
    }
    diagnostics = {
        "best_start": best.index,
        "starts": [
            {"index": o.index, "origin": o.origin, "objective": o.objective, "violation": o.violation, "kkt": o.kkt, "outer_iterations": len(o.history)}
            for o in sorted(outcomes, key=lambda o: o.index)
        ],
        "history": best.history,
        "options": asdict(opts),
    }
    result = SolveResult(proc, cost(tr.problem, proc), report, multipliers, diagnostics, status)
    LOGGER.info("best start %d: objective %.6g, violation %.3e", best.index, result.objective, report.worst)
    return result


def _solve(tr: Transcription, guesses: list[tuple[str, ExtendedProcess]]) -> SolveResult:
    opts = tr.options
    outcomes = []
    index = 0
    for origin, guess in guesses:
        rng = np.random.default_rng([opts.seed, 10_000 + index])
        x0 = tr.encode(guess, rng)
        outcomes.append(_run_start(tr, x0, index, origin))
        index += 1
    for i in range(opts.multistart):
        rng = np.random.default_rng([opts.seed, i])
        x0 = tr.random_start(rng)
        outcomes.append(_run_start(tr, x0, index, f"random-{i}"))
        index += 1
    if not outcomes:
        raise ValueError("no starting points: give guesses or a positive multistart count")
    result = _finish(tr, outcomes)
    if result.status != "ok":
        raise NoFeasiblePointError(result)
    return result


def solve(problem: ProblemSpec, options: SolveOptions = SolveOptions(), guesses=()) -> SolveResult:
    """Best local solution over the supplied guesses and ``options.multistart`` random starts.

    Raises
    ------
    NoFeasiblePointError
        When no start reaches the violation tolerance.  The exception carries
        the least-violating result.
    """
    tr = Transcription(problem, options)
    return _solve(tr, [(f"guess-{i}", g) for i, g in enumerate(guesses)])


def solve_strict(
    problem: ProblemSpec,
    eps: float,
    anchor: ExtendedProcess,
    delta: float,
    options: SolveOptions = SolveOptions(),
    warm_starts=(),
) -> SolveResult:
    """Solve with clock rate at least ``eps`` inside the graph-distance ball around ``anchor``.

    The first start is the strictified anchor; ``warm_starts`` follow.
    """
    if not 0.0 <= eps < 1.0 or delta <= 0:
        raise ValueError("need 0 <= eps < 1 and delta > 0")
    opts = SolveOptions(**{**asdict(options), "eps": eps})
    tr = Transcription(problem, opts, anchor=anchor, delta=delta)
    guesses = []
    if eps > 0:
        guesses.append(("strictified-anchor", strictify(problem, anchor, eps).process))
    else:
        guesses.append(("anchor", anchor))
    guesses += [(f"warm-{i}", w) for i, w in enumerate(warm_starts)]
    result = _solve(tr, guesses)
    result.diagnostics["d_infty_to_anchor"] = d_infty(extended_graph(result.process), extended_graph(anchor))
    return result

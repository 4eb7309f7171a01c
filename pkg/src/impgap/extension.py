"""Passage between strict and extended processes.

A strict process is reparameterised by the arc-length-like clock
``sigma(t) = t - t1 + v(t)``, which has slope at least one, so it is always
invertible.  The converse map only exists where the clock rate ``omega0`` is
positive; :func:`strictify` forces that by a cell-wise lower bound.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ExtendedProcess, ModelError, ProblemSpec, StrictProcess, integrate

__all__ = ["TimeChange", "FastArcError", "embed", "invert", "strictify", "StrictifyResult"]


class FastArcError(ModelError):
    """The extended process has cells with (near) zero clock rate."""

    def __init__(self, cells):
        cells = list(map(int, cells))
        preview = cells[:10]
        super().__init__(f"{len(cells)} cell(s) with clock rate below threshold, first {preview}")
        self.cells = cells


@dataclass(frozen=True, eq=False)
class TimeChange:
    """Monotone piecewise-linear clock ``sigma`` on the nodes ``t``."""

    t: np.ndarray
    sigma_nodes: np.ndarray

    @classmethod
    def from_strict(cls, proc: StrictProcess) -> "TimeChange":
        sig = proc.t - proc.t[0] + proc.v
        if np.any(np.diff(sig) <= 0):
            raise ModelError("clock is not strictly increasing; the variation path is corrupt")
        return cls(proc.t, sig)

    @property
    def S(self) -> float:
        return float(self.sigma_nodes[-1])

    def sigma(self, t) -> np.ndarray:
        return np.interp(t, self.t, self.sigma_nodes)

    def inverse(self, s) -> np.ndarray:
        return np.interp(s, self.sigma_nodes, self.t)


def embed(proc: StrictProcess) -> ExtendedProcess:
    """Extended process of a strict one (states are mapped node by node)."""
    clock = TimeChange.from_strict(proc)
    ds = np.diff(clock.sigma_nodes)
    dt = np.diff(proc.t)
    du = np.diff(proc.u, axis=0)
    omega0 = dt / ds
    omega = du / ds[:, None]
    return ExtendedProcess(
        clock.sigma_nodes.copy(),
        omega0,
        omega,
        proc.a.copy(),
        proc.t.copy(),
        proc.x.copy(),
        proc.v.copy(),
    )


def invert(proc: ExtendedProcess, threshold: float = 1e-9) -> StrictProcess:
    """Strict process of an extended one with positive clock rate.

    ``u`` starts at zero (the embedding forgets translations of ``u``).  The
    result lives on a uniform time grid with the same number of cells.
    """
    bad = np.flatnonzero(proc.omega0 < threshold)
    if bad.size:
        raise FastArcError(bad)
    t_nodes = proc.y0
    u_nodes = np.vstack([np.zeros(proc.omega.shape[1]), np.cumsum(proc.omega * proc.ds[:, None], axis=0)])
    t_uniform = np.linspace(t_nodes[0], t_nodes[-1], proc.M + 1)
    if np.allclose(t_nodes, t_uniform, rtol=0.0, atol=1e-12 * max(1.0, abs(t_nodes[-1]))):
        return StrictProcess(t_nodes.copy(), u_nodes, proc.alpha.copy(), proc.y.copy(), proc.nu.copy())

    def at(values):
        return np.column_stack([np.interp(t_uniform, t_nodes, values[:, j]) for j in range(values.shape[1])])

    mids = 0.5 * (t_uniform[1:] + t_uniform[:-1])
    cells = np.clip(np.searchsorted(t_nodes, mids, side="right") - 1, 0, proc.M - 1)
    return StrictProcess(
        t_uniform,
        at(u_nodes),
        proc.alpha[cells],
        at(proc.y),
        np.interp(t_uniform, t_nodes, proc.nu),
    )


@dataclass(frozen=True, eq=False)
class StrictifyResult:
    process: ExtendedProcess
    flagged_cells: np.ndarray
    control_distance: float


def strictify(problem: ProblemSpec, proc: ExtendedProcess, eps: float) -> StrictifyResult:
    """Raise the clock rate to at least ``eps`` cell by cell and re-integrate.

    Cells with ``omega0 < eps`` get ``(eps, (1 - eps) omega/|omega|)``.  A cell
    with ``omega = 0`` there has no direction; it is set to ``(1, 0)`` and
    flagged.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    w0 = proc.omega0.copy()
    w = proc.omega.copy()
    low = w0 < eps
    norms = np.linalg.norm(w, axis=1)
    undirected = low & (norms <= 1e-15)
    scaled = low & ~undirected
    w0[scaled] = eps
    w[scaled] = (1.0 - eps) * w[scaled] / norms[scaled, None]
    w0[undirected] = 1.0
    w[undirected] = 0.0
    new = integrate(problem, proc.s, w0, w, proc.alpha, proc.y0[0], proc.y[0])
    dist = float(np.max(np.abs(np.column_stack([w0 - proc.omega0, w - proc.omega])))) if proc.M else 0.0
    return StrictifyResult(new, np.flatnonzero(undirected), dist)

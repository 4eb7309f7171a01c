"""Empirical estimate of the local infimum gap at an extended minimizer.

For a decreasing sequence of clock-rate floors ``eps`` the probe solves the
problem restricted to ``omega0 >= eps`` inside the graph-distance ball of
radius ``delta`` around the anchor.  Such processes invert to strict ones, so
their best cost bounds the local strict infimum from above.  The probe can
show evidence of no gap; it never certifies one way or the other.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .extension import strictify
from .model import ExtendedProcess, ProblemSpec, cost, d_infty, extended_graph, feasibility
from .solver import NoFeasiblePointError, SolveOptions, solve_strict

LOGGER = logging.getLogger(__name__)

__all__ = ["GapRow", "GapReport", "ProbeOptions", "probe", "DEFAULT_EPS"]

DEFAULT_EPS = tuple(1.0 / 2**k for k in range(2, 8))


@dataclass(frozen=True)
class ProbeOptions:
    """Probe settings.

    Attributes
    ----------
    solver : options of each restricted solve; by default only the
        strictified anchor and the previous row are used as starts.
    gap_tol : estimated gaps at most this large count as no gap.
    feas_tol : feasibility tolerance of a row.
    extrapolate : extrapolate linearly in ``eps`` from the last two rows.
    """

    solver: SolveOptions = field(default_factory=lambda: SolveOptions(multistart=0))
    gap_tol: float = 1e-3
    feas_tol: float = 1e-6
    extrapolate: bool = True


@dataclass
class GapRow:
    eps: float
    feasible: bool
    cost: float | None
    residual: float
    d_infty: float | None
    source: str
    min_clock_rate: float | None
    raw_residual: float | None = None

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class GapReport:
    extended_objective: float
    delta: float
    rows: list
    strict_estimate: float | None
    estimated_gap: float | None
    verdict: str
    notes: list = field(default_factory=list)
    processes: dict = field(default_factory=dict, repr=False)

    def to_json(self) -> dict:
        return {
            "extended_objective": self.extended_objective,
            "delta": self.delta,
            "rows": [r.to_json() for r in self.rows],
            "strict_estimate": self.strict_estimate,
            "estimated_gap": self.estimated_gap,
            "verdict": self.verdict,
            "notes": list(self.notes),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["eps", "feasible", "cost", "residual", "d_infty", "source", "min_clock_rate", "raw_residual"])
        for r in self.rows:
            writer.writerow([repr(r.eps), int(r.feasible), "" if r.cost is None else repr(r.cost), repr(r.residual), "" if r.d_infty is None else repr(r.d_infty), r.source, "" if r.min_clock_rate is None else repr(r.min_clock_rate), "" if r.raw_residual is None else repr(r.raw_residual)])
        return buf.getvalue()


def _row_from(problem, anchor, proc: ExtendedProcess, eps: float, source: str, feas_tol: float) -> GapRow:
    rep = feasibility(problem, proc)
    return GapRow(
        eps=float(eps),
        feasible=bool(rep.feasible(feas_tol)),
        cost=float(cost(problem, proc)),
        residual=float(rep.worst),
        d_infty=float(d_infty(extended_graph(proc), extended_graph(anchor))),
        source=source,
        min_clock_rate=float(proc.omega0.min()) if proc.M else None,
    )


def probe(problem: ProblemSpec, anchor: ExtendedProcess, delta: float = 0.5, eps_list=DEFAULT_EPS, options: ProbeOptions = ProbeOptions()) -> GapReport:
    """Strict-restricted costs for each ``eps`` and the resulting gap estimate.

    A feasible row at ``eps`` stays admissible at every smaller ``eps``; it is
    passed on as a warm start and kept whenever the new solve does worse.
    """
    eps_values = sorted({float(e) for e in eps_list}, reverse=True)
    if not eps_values or eps_values[-1] <= 0 or eps_values[0] >= 1:
        raise ValueError("eps values must lie in (0, 1)")
    if delta <= 0:
        raise ValueError("delta must be positive")
    J_e = float(cost(problem, anchor))
    rows: list[GapRow] = []
    processes: dict = {}
    notes = ["under-approximation of the strict local infimum: local solves on a finite eps grid"]
    previous: ExtendedProcess | None = None
    for eps in eps_values:
        warm = [previous] if previous is not None else []
        try:
            res = solve_strict(problem, eps, anchor, delta, options.solver, warm_starts=warm)
            row = _row_from(problem, anchor, res.process, eps, "solve", options.feas_tol)
            proc = res.process
        except NoFeasiblePointError as exc:
            row = _row_from(problem, anchor, exc.result.process, eps, "solve", options.feas_tol)
            row.feasible = False
            proc = exc.result.process
        row.raw_residual = float(feasibility(problem, strictify(problem, anchor, eps).process).worst)
        if row.feasible and row.d_infty is not None and row.d_infty >= delta:
            row.feasible = False
            notes.append(f"eps={eps!r}: solve left the trust region (d_infty {row.d_infty:.3g})")
        if previous is not None:
            prev_row = _row_from(problem, anchor, previous, eps, "carried", options.feas_tol)
            if prev_row.feasible and (not row.feasible or prev_row.cost < row.cost - 1e-9 * max(1.0, abs(row.cost))):
                row, proc = prev_row, previous
        if row.feasible:
            previous = proc
        rows.append(row)
        processes[eps] = proc
        LOGGER.info("eps=%g feasible=%s cost=%s", eps, row.feasible, row.cost)

    feasible = [r for r in rows if r.feasible]
    estimate = None
    if feasible:
        last = [r for r in rows[-2:] if r.feasible]
        if options.extrapolate and len(last) == 2 and last[0].eps != last[1].eps:
            (e1, c1), (e2, c2) = (last[0].eps, last[0].cost), (last[1].eps, last[1].cost)
            slope = (c1 - c2) / (e1 - e2)
            estimate = float(c2 - slope * e2)
        else:
            estimate = float(feasible[-1].cost)
    if estimate is None:
        verdict, gap = "gap-suspected", None
        notes.append("no feasible strict-restricted process found in the ball")
    else:
        gap = max(0.0, estimate - J_e)
        verdict = "no-gap-observed" if gap <= options.gap_tol else "gap-suspected"
    return GapReport(J_e, float(delta), rows, estimate, gap, verdict, notes, processes)

"""Static SVG views of an extended process."""
from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .model import ExtendedProcess  # noqa: E402

__all__ = ["process_svg", "gap_svg"]

_SVG_OPTS = {"format": "svg", "metadata": {"Date": None, "Creator": None}}


def _render(fig) -> str:
    # a fixed hash salt makes the element ids, and hence the file, reproducible
    with matplotlib.rc_context({"svg.hashsalt": "impgap", "svg.fonttype": "none"}):
        buf = io.StringIO()
        fig.savefig(buf, **_SVG_OPTS)
    plt.close(fig)
    return buf.getvalue()


def process_svg(proc: ExtendedProcess, title: str = "") -> str:
    """States against real time ``t = y0(s)`` and against pseudo-time ``s``.

    The left panel draws jumps as vertical segments (fast arcs keep ``t``
    fixed).  The right panel adds the clock rate and the impulse rates as
    step functions.
    """
    fig, (left, right) = plt.subplots(1, 2, figsize=(11, 4), constrained_layout=True)
    n = proc.y.shape[1]
    for i in range(n):
        left.plot(proc.y0, proc.y[:, i], label=f"x{i + 1}")
        right.plot(proc.s, proc.y[:, i], label=f"y{i + 1}")
    left.set_xlabel("t")
    left.set_title("time-expanded view")
    left.legend(loc="best", fontsize="small")
    edges = np.repeat(proc.s, 2)[1:-1]
    right.plot(edges, np.repeat(proc.omega0, 2), "k--", lw=1, label="omega0")
    for j in range(proc.omega.shape[1]):
        right.plot(edges, np.repeat(proc.omega[:, j], 2), ":", lw=1, label=f"omega{j + 1}")
    right.plot(proc.s, proc.y0, "k-", lw=0.8, alpha=0.5, label="t")
    right.set_xlabel("s")
    right.set_title("pseudo-time view")
    right.legend(loc="best", fontsize="small")
    if title:
        fig.suptitle(title)
    return _render(fig)


def gap_svg(rows, extended_objective: float, title: str = "") -> str:
    """Strict-restricted cost against the clock-rate floor, log-scaled."""
    fig, ax = plt.subplots(figsize=(6, 4), constrained_layout=True)
    eps = np.array([r.eps for r in rows if r.feasible and r.cost is not None])
    costs = np.array([r.cost for r in rows if r.feasible and r.cost is not None])
    if eps.size:
        ax.plot(eps, costs, "o-", label="strict-restricted cost")
        ax.set_xscale("log", base=2)
    ax.axhline(extended_objective, color="k", ls="--", lw=1, label="extended cost")
    ax.set_xlabel("eps")
    ax.set_ylabel("cost")
    ax.legend(loc="best", fontsize="small")
    if title:
        ax.set_title(title)
    return _render(fig)

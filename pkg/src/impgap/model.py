"""Problems, processes, feasibility, cost and the graph distance.

An extended process lives on a pseudo-time grid ``0 = s_0 < ... < s_M = S``
with piecewise-constant controls ``(omega0, omega, alpha)`` per cell and
piecewise-linear states ``(y0, y, nu)`` obtained by explicit Euler steps.  A
strict process is the same data in real time ``t`` with a continuous control
``u``.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .fields import Poly, PolyMap
from .geometry import ConeSpec, ConstraintFunction, SetSpec, set_from_json

LOGGER = logging.getLogger(__name__)

__all__ = [
    "ModelError",
    "ControlOutsideError",
    "ControlSet",
    "ProblemSpec",
    "ExtendedProcess",
    "StrictProcess",
    "FeasibilityReport",
    "Graph",
    "integrate",
    "integrate_strict",
    "feasibility",
    "cost",
    "d_infty",
    "extended_graph",
    "strict_graph",
    "refine",
    "write_extended_csv",
    "read_extended_csv",
    "write_strict_csv",
    "read_strict_csv",
]

CONTROL_TOL = 1e-9


class ModelError(ValueError):
    pass


class ControlOutsideError(ModelError):
    """Some cell's control leaves the admissible set; ``cells`` lists them."""

    def __init__(self, message: str, cells: Sequence[int]):
        super().__init__(message)
        self.cells = list(cells)


@dataclass(frozen=True, eq=False)
class ControlSet:
    """Compact ordinary-control set: an explicit list or a sampled box."""

    points: np.ndarray | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    grid: int = 5

    def __post_init__(self):
        if (self.points is None) == (self.lo is None):
            raise ModelError("give either a finite list or box bounds")
        if self.points is not None:
            pts = np.atleast_2d(np.asarray(self.points, dtype=float))
            object.__setattr__(self, "points", pts)
        else:
            lo = np.asarray(self.lo, dtype=float).ravel()
            hi = np.asarray(self.hi, dtype=float).ravel()
            if lo.shape != hi.shape or np.any(lo > hi) or not np.all(np.isfinite(hi - lo)):
                raise ModelError("control box must be bounded with lo <= hi")
            object.__setattr__(self, "lo", lo)
            object.__setattr__(self, "hi", hi)

    @classmethod
    def finite(cls, points) -> "ControlSet":
        return cls(points=points)

    @classmethod
    def box(cls, lo, hi, grid: int = 5) -> "ControlSet":
        return cls(lo=lo, hi=hi, grid=grid)

    @property
    def is_finite(self) -> bool:
        return self.points is not None

    @property
    def dim(self) -> int:
        return self.points.shape[1] if self.is_finite else self.lo.size

    def samples(self) -> np.ndarray:
        if self.is_finite:
            return self.points
        axes = [np.linspace(l, h, self.grid if h > l else 1) for l, h in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([g.ravel() for g in mesh])

    def contains(self, a, tol: float = CONTROL_TOL) -> bool:
        a = np.asarray(a, dtype=float)
        if self.is_finite:
            if self.points.shape[1] == 0:
                return a.size == 0
            return bool(np.min(np.max(np.abs(self.points - a), axis=1)) <= tol)
        return bool(np.all(a >= self.lo - tol) and np.all(a <= self.hi + tol))

    def to_json(self) -> dict:
        if self.is_finite:
            return {"finite": self.points.tolist()}
        return {"box": {"lo": self.lo.tolist(), "hi": self.hi.tolist(), "grid": int(self.grid)}}

    @classmethod
    def from_json(cls, data: Mapping, path: str = "controls") -> "ControlSet":
        if not isinstance(data, Mapping) or len(data) != 1:
            raise ModelError(f"{path}: expected a single-key object")
        (tag, body), = data.items()
        if tag == "finite":
            return cls.finite(body)
        if tag == "box":
            unknown = set(body) - {"lo", "hi", "grid"}
            if unknown:
                raise ModelError(f"{path}.box: unknown keys {sorted(unknown)}")
            return cls.box(body["lo"], body["hi"], int(body.get("grid", 5)))
        raise ModelError(f"{path}: unknown control-set tag {tag!r}")


def _join_state_control(tx, a, q: int) -> tuple[np.ndarray, np.ndarray]:
    tx = np.asarray(tx, dtype=float)
    a = np.atleast_1d(np.asarray(a, dtype=float))
    lead = np.broadcast_shapes(tx.shape[:-1], a.shape[:-1])
    return np.broadcast_to(tx, lead + tx.shape[-1:]), np.broadcast_to(a, lead + (q,))


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Data of the impulsive problem and of its extension.

    Variable conventions: ``drift`` takes ``(t, x, a)``; ``impulse`` takes
    ``(t, x)`` and stores row ``i`` of field ``g_j`` at component ``i*m + j``;
    constraint pieces take ``(t, x)``; ``cost`` takes ``(t1, x1, t2, x2, v2)``;
    ``target`` lives in the ``(t1, x1, t2, x2)`` space.
    """

    n: int
    m: int
    q: int
    drift: PolyMap
    impulse: PolyMap
    constraints: tuple
    cost: Poly
    target: SetSpec
    cone: ConeSpec
    controls: ControlSet
    K: float = float("inf")
    name: str = "problem"

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        self.validate()

    # structure
    def validate(self) -> None:
        n, m, q = self.n, self.m, self.q
        checks = [
            (self.drift.nvars == 1 + n + q and self.drift.dim == n, "drift must map (t,x,a) to R^n"),
            (self.impulse.nvars == 1 + n and self.impulse.dim == n * m, "impulse table must map (t,x) to R^(n*m)"),
            (self.cost.nvars == 3 + 2 * n, "cost must take (t1,x1,t2,x2,v2)"),
            (self.target.dim == 2 + 2 * n, "target must live in R^(2+2n)"),
            (self.cone.dim == m, "cone dimension must equal m"),
            (self.controls.dim == q, "control set dimension must equal q"),
            (all(h.nvars == 1 + n for h in self.constraints), "constraints must take (t,x)"),
            (self.K > 0, "variation bound must be positive"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ModelError(f"{self.name}: {msg}")

    def cost_monotone_in_variation(self, samples: int = 64, seed: int = 0, radius: float = 1.0) -> bool:
        """Sampled check that the cost does not decrease in the final variation."""
        rng = np.random.default_rng(seed)
        base = rng.uniform(-radius, radius, size=(samples, 3 + 2 * self.n))
        grads = self.cost.grad(base)
        return bool(np.all(grads[:, -1] >= -1e-12))

    @property
    def drift_uses_control(self) -> bool:
        if self.controls.is_finite and self.controls.points.shape[0] <= 1:
            return False
        return any(self.drift.depends_on(1 + self.n + l) for l in range(self.q))

    @property
    def time_independent_constraints(self) -> bool:
        return not any(h.depends_on_time() for h in self.constraints)

    # field evaluation (leading axes of ``tx`` and ``a`` broadcast together)
    def drift_at(self, tx, a) -> np.ndarray:
        tx, a = _join_state_control(tx, a, self.q)
        return self.drift(np.concatenate([tx, a], axis=-1))

    def drift_jacobian(self, tx, a) -> np.ndarray:
        tx, a = _join_state_control(tx, a, self.q)
        return self.drift.jac(np.concatenate([tx, a], axis=-1))

    def impulse_at(self, tx) -> np.ndarray:
        """Matrix ``G`` with columns ``g_j``, shape ``(..., n, m)``."""
        tx = np.asarray(tx, dtype=float)
        return self.impulse(tx).reshape(tx.shape[:-1] + (self.n, self.m))

    def impulse_jacobian(self, tx) -> np.ndarray:
        """Shape ``(..., n, m, 1+n)``."""
        tx = np.asarray(tx, dtype=float)
        return self.impulse.jac(tx).reshape(tx.shape[:-1] + (self.n, self.m, 1 + self.n))

    def constraint_values(self, tx) -> np.ndarray:
        tx = np.asarray(tx, dtype=float)
        if not self.constraints:
            return np.zeros(tx.shape[:-1] + (0,))
        return np.stack([h(tx) for h in self.constraints], axis=-1)

    def endpoint_vector(self, proc: "ExtendedProcess") -> np.ndarray:
        return np.concatenate([[proc.y0[0]], proc.y[0], [proc.y0[-1]], proc.y[-1], [proc.nu[-1]]])

    def to_json(self) -> dict:
        impulse = [[self.impulse.polys[i * self.m + j].to_json() for i in range(self.n)] for j in range(self.m)]
        return {
            "name": self.name,
            "n": self.n,
            "m": self.m,
            "q": self.q,
            "drift": self.drift.to_json(),
            "impulse": impulse,
            "constraints": [h.to_json() for h in self.constraints],
            "cost": self.cost.to_json(),
            "target": self.target.to_json(),
            "cone": self.cone.to_json(),
            "controls": self.controls.to_json(),
            "K": "inf" if not np.isfinite(self.K) else float(self.K),
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "ProblemSpec":
        allowed = {"name", "n", "m", "q", "drift", "impulse", "constraints", "cost", "target", "cone", "controls", "K", "tolerance"}
        unknown = set(data) - allowed
        if unknown:
            raise ModelError(f"problem: unknown keys {sorted(unknown)}")
        try:
            n, m, q = int(data["n"]), int(data["m"]), int(data["q"])
            tol = float(data.get("tolerance", 1e-8))
            drift = PolyMap([Poly.from_json(1 + n + q, c) for c in data["drift"]])
            impulse_cols = data["impulse"]
            if len(impulse_cols) != m or any(len(col) != n for col in impulse_cols):
                raise ModelError("problem.impulse: expected m lists of n polynomials")
            impulse = PolyMap([Poly.from_json(1 + n, impulse_cols[j][i]) for i in range(n) for j in range(m)])
            constraints = tuple(
                ConstraintFunction.from_json(1 + n, c, tol, f"problem.constraints[{k}]")
                for k, c in enumerate(data.get("constraints", []))
            )
            K = data.get("K", "inf")
            K = float("inf") if K in ("inf", None) else float(K)
            return cls(
                n=n,
                m=m,
                q=q,
                drift=drift,
                impulse=impulse,
                constraints=constraints,
                cost=Poly.from_json(3 + 2 * n, data["cost"]),
                target=set_from_json(data["target"], "problem.target"),
                cone=ConeSpec.from_json(data["cone"], "problem.cone"),
                controls=ControlSet.from_json(data["controls"], "problem.controls"),
                K=K,
                name=str(data.get("name", "problem")),
            )
        except KeyError as exc:
            raise ModelError(f"problem: missing key {exc.args[0]!r}") from exc


@dataclass(frozen=True, eq=False)
class ExtendedProcess:
    """Extended process on a pseudo-time grid.

    Attributes
    ----------
    s : (M+1,) grid nodes, ``s[0] = 0``.
    omega0 : (M,) clock rate per cell.
    omega : (M, m) impulse rate per cell.
    alpha : (M, q) ordinary control per cell.
    y0, y, nu : node values, shapes (M+1,), (M+1, n), (M+1,).
    """

    s: np.ndarray
    omega0: np.ndarray
    omega: np.ndarray
    alpha: np.ndarray
    y0: np.ndarray
    y: np.ndarray
    nu: np.ndarray

    @property
    def M(self) -> int:
        return self.omega0.size

    @property
    def S(self) -> float:
        return float(self.s[-1])

    @property
    def ds(self) -> np.ndarray:
        return np.diff(self.s)

    @property
    def states(self) -> np.ndarray:
        """Node states ``(y0, y, nu)`` stacked, shape ``(M+1, n+2)``."""
        return np.column_stack([self.y0, self.y, self.nu])

    @property
    def tx(self) -> np.ndarray:
        return np.column_stack([self.y0, self.y])

    def rates(self, problem: ProblemSpec) -> np.ndarray:
        """Cell velocities of ``y``, evaluated at the left node."""
        tx = self.tx[:-1]
        f = problem.drift_at(tx, self.alpha)
        G = problem.impulse_at(tx)
        return f * self.omega0[:, None] + np.einsum("kij,kj->ki", G, self.omega)


@dataclass(frozen=True, eq=False)
class StrictProcess:
    """Strict process on a real-time grid with piecewise-linear ``u``."""

    t: np.ndarray
    u: np.ndarray
    a: np.ndarray
    x: np.ndarray
    v: np.ndarray

    @property
    def M(self) -> int:
        return self.t.size - 1

    @property
    def t1(self) -> float:
        return float(self.t[0])

    @property
    def t2(self) -> float:
        return float(self.t[-1])

    @property
    def du(self) -> np.ndarray:
        return np.diff(self.u, axis=0) / np.diff(self.t)[:, None]


@dataclass(frozen=True)
class FeasibilityReport:
    state_violation: float
    endpoint_distance: float
    variation_excess: float
    initial_variation: float

    @property
    def worst(self) -> float:
        return max(self.state_violation, self.endpoint_distance, self.variation_excess, self.initial_variation)

    def feasible(self, tol: float = 1e-6) -> bool:
        return self.worst <= tol

    def to_json(self) -> dict:
        return {
            "state_violation": self.state_violation,
            "endpoint_distance": self.endpoint_distance,
            "variation_excess": self.variation_excess,
            "initial_variation": self.initial_variation,
        }


def _kernel_args(problem: ProblemSpec):
    fc, fco, fe = problem.drift.arrays()
    gc, gco, ge = problem.impulse.arrays()
    return fc, fco, fe, gc, gco, ge


def _check_controls(problem: ProblemSpec, omega0, omega, alpha, tol: float) -> None:
    norms = np.linalg.norm(omega, axis=1)
    bad = np.flatnonzero((omega0 < -tol) | (np.abs(omega0 + norms - 1.0) > tol))
    if problem.cone.kind != "full":
        bad = np.union1d(bad, [k for k in range(omega.shape[0]) if not problem.cone.contains(omega[k], tol)])
    if bad.size:
        raise ControlOutsideError(f"{bad.size} cell(s) leave the admissible control set", bad)
    bad_a = [k for k in range(alpha.shape[0]) if not problem.controls.contains(alpha[k], tol)]
    if bad_a:
        raise ControlOutsideError(f"{len(bad_a)} cell(s) use ordinary controls outside A", bad_a)


def integrate(
    problem: ProblemSpec,
    s,
    omega0,
    omega,
    alpha,
    y0_init: float,
    y_init,
    check: bool = True,
    tol: float = CONTROL_TOL,
) -> ExtendedProcess:
    """Explicit Euler integration of the extended system from ``nu(0) = 0``."""
    s = np.ascontiguousarray(s, dtype=float)
    M = s.size - 1
    omega0 = np.ascontiguousarray(omega0, dtype=float).reshape(M)
    omega = np.ascontiguousarray(omega, dtype=float).reshape(M, problem.m)
    alpha = np.ascontiguousarray(alpha, dtype=float).reshape(M, problem.q)
    if np.any(np.diff(s) <= 0):
        raise ModelError("pseudo-time grid must be strictly increasing")
    if check:
        _check_controls(problem, omega0, omega, alpha, tol)
    r = np.linalg.norm(omega, axis=1)
    z0 = np.concatenate([[y0_init], np.asarray(y_init, dtype=float), [0.0]])
    Z = _kernels.forward(z0, np.diff(s), omega0, omega, r, alpha, *_kernel_args(problem), problem.n, problem.m)
    return ExtendedProcess(s - s[0], omega0, omega, alpha, Z[:, 0], Z[:, 1:-1].copy(), Z[:, -1])


def integrate_strict(problem: ProblemSpec, t, u, a, x_init) -> StrictProcess:
    """Euler integration of the impulsive system with piecewise-linear ``u``."""
    t = np.ascontiguousarray(t, dtype=float)
    M = t.size - 1
    u = np.asarray(u, dtype=float).reshape(M + 1, problem.m)
    a = np.ascontiguousarray(a, dtype=float).reshape(M, problem.q)
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise ModelError("time grid must be strictly increasing")
    du = np.ascontiguousarray(np.diff(u, axis=0) / dt[:, None])
    if problem.cone.kind != "full":
        bad = [k for k in range(M) if not problem.cone.contains(du[k], 1e-9 * max(1.0, np.linalg.norm(du[k])))]
        if bad:
            raise ControlOutsideError("control derivative leaves the cone", bad)
    r = np.linalg.norm(du, axis=1)
    z0 = np.concatenate([[t[0]], np.asarray(x_init, dtype=float), [0.0]])
    Z = _kernels.forward(z0, dt, np.ones(M), du, r, a, *_kernel_args(problem), problem.n, problem.m)
    return StrictProcess(t, u, a, Z[:, 1:-1].copy(), Z[:, -1])


def feasibility(problem: ProblemSpec, proc: ExtendedProcess) -> FeasibilityReport:
    """Exact constraint residuals over the grid nodes."""
    hv = problem.constraint_values(proc.tx)
    state = float(max(hv.max(initial=0.0), 0.0)) if hv.size else 0.0
    e = problem.endpoint_vector(proc)
    endpoint = float(problem.target.distance(e[:-1]))
    excess = float(max(proc.nu[-1] - problem.K, 0.0)) if np.isfinite(problem.K) else 0.0
    return FeasibilityReport(state, endpoint, excess, float(abs(proc.nu[0])))


def cost(problem: ProblemSpec, proc: ExtendedProcess) -> float:
    return float(problem.cost(problem.endpoint_vector(proc)))


def refine(problem: ProblemSpec, proc: ExtendedProcess, factor: int = 2) -> ExtendedProcess:
    """Split every cell into ``factor`` equal cells and re-integrate."""
    s = proc.s
    fine = np.concatenate([np.linspace(s[k], s[k + 1], factor + 1)[:-1] for k in range(proc.M)] + [[s[-1]]])
    rep = lambda arr: np.repeat(arr, factor, axis=0)  # noqa: E731
    return integrate(problem, fine, rep(proc.omega0), rep(proc.omega), rep(proc.alpha), proc.y0[0], proc.y[0], check=False)


# ---------------------------------------------------------------------------
# graph distance
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Graph:
    """Piecewise-linear path ``values`` over ``nodes`` with time tags ``(tau1, tau2)``."""

    tau1: float
    tau2: float
    nodes: np.ndarray
    values: np.ndarray = field(repr=False)


def extended_graph(proc: ExtendedProcess) -> Graph:
    return Graph(float(proc.y0[0]), float(proc.y0[-1]), proc.s, np.column_stack([proc.y, proc.nu]))


def strict_graph(proc: StrictProcess) -> Graph:
    return Graph(proc.t1, proc.t2, proc.t, np.column_stack([proc.x, proc.v]))


def _interp_rows(nodes: np.ndarray, values: np.ndarray, at: np.ndarray) -> np.ndarray:
    # np.interp extends by constants outside the node range
    return np.column_stack([np.interp(at, nodes, values[:, j]) for j in range(values.shape[1])])


def d_infty(g1: Graph, g2: Graph) -> float:
    """Endpoint-tag distance plus the sup-norm of the constant extensions.

    The difference of two piecewise-linear paths is affine between merged
    breakpoints, so its (convex) norm peaks at a breakpoint and the sup over
    the union of node sets is exact.
    """
    if g1.values.shape[1] != g2.values.shape[1]:
        raise ModelError("graphs have different value dimensions")
    at = np.union1d(g1.nodes, g2.nodes)
    diff = _interp_rows(g1.nodes, g1.values, at) - _interp_rows(g2.nodes, g2.values, at)
    sup = float(np.max(np.linalg.norm(diff, axis=1))) if at.size else 0.0
    return abs(g1.tau1 - g2.tau1) + abs(g1.tau2 - g2.tau2) + sup


# ---------------------------------------------------------------------------
# CSV forms
# ---------------------------------------------------------------------------


def _write_rows(path, header: list[str], rows: np.ndarray) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) for v in row])
    text = buf.getvalue()
    if path is None:
        return text
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return None


def _cell_to_nodes(arr: np.ndarray) -> np.ndarray:
    # node row k carries cell k's control; the last row repeats the last cell
    return np.vstack([arr, arr[-1:]])


def write_extended_csv(proc: ExtendedProcess, path=None):
    """Columns ``s, omega0, omega_1..m, alpha_1..q, y0, y_1..n, nu``."""
    m, q, n = proc.omega.shape[1], proc.alpha.shape[1], proc.y.shape[1]
    header = ["s", "omega0"] + [f"omega_{j+1}" for j in range(m)] + [f"alpha_{j+1}" for j in range(q)]
    header += ["y0"] + [f"y_{i+1}" for i in range(n)] + ["nu"]
    rows = np.column_stack(
        [proc.s, _cell_to_nodes(proc.omega0[:, None]), _cell_to_nodes(proc.omega), _cell_to_nodes(proc.alpha), proc.y0, proc.y, proc.nu]
    )
    return _write_rows(path, header, rows)


def _read_table(path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = np.array([[float(v) for v in r] for r in reader if r], dtype=float)
    return header, rows


def _columns(header: list[str], prefix: str) -> list[int]:
    return [i for i, h in enumerate(header) if h.startswith(prefix + "_")]


def read_extended_csv(path) -> ExtendedProcess:
    header, rows = _read_table(path)
    try:
        col = {h: i for i, h in enumerate(header)}
        s, w0, y0, nu = rows[:, col["s"]], rows[:-1, col["omega0"]], rows[:, col["y0"]], rows[:, col["nu"]]
    except KeyError as exc:
        raise ModelError(f"{path}: missing column {exc.args[0]!r}") from exc
    w = rows[:-1][:, _columns(header, "omega")]
    a = rows[:-1][:, _columns(header, "alpha")]
    y = rows[:, _columns(header, "y")]
    return ExtendedProcess(s, w0, w, a, y0, y, nu)


def write_strict_csv(proc: StrictProcess, path=None):
    """Columns ``t, u_1..m, a_1..q, x_1..n, v``."""
    m, q, n = proc.u.shape[1], proc.a.shape[1], proc.x.shape[1]
    header = ["t"] + [f"u_{j+1}" for j in range(m)] + [f"a_{j+1}" for j in range(q)] + [f"x_{i+1}" for i in range(n)] + ["v"]
    rows = np.column_stack([proc.t, proc.u, _cell_to_nodes(proc.a), proc.x, proc.v])
    return _write_rows(path, header, rows)


def read_strict_csv(path) -> StrictProcess:
    header, rows = _read_table(path)
    try:
        col = {h: i for i, h in enumerate(header)}
        t, v = rows[:, col["t"]], rows[:, col["v"]]
    except KeyError as exc:
        raise ModelError(f"{path}: missing column {exc.args[0]!r}") from exc
    return StrictProcess(t, rows[:, _columns(header, "u")], rows[:-1][:, _columns(header, "a")], rows[:, _columns(header, "x")], v)

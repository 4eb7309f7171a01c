"""Command-line front end.

Every command writes a JSON report (validated against the shipped schema)
into the output directory, plus CSV processes and SVG plots where relevant.
Exit status: 0 when the command ran and reached a verdict, 2 when the verdict
is inconclusive (or a PMP check fails), 1 on errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import __version__
from .extension import FastArcError, embed, invert
from .fixtures import FIXTURES, load_fixture, reference_process
from .gap_probe import DEFAULT_EPS, ProbeOptions, probe
from .io import SCHEMA_VERSION, InputError, load_problem, write_report
from .model import (
    ExtendedProcess,
    ModelError,
    ProblemSpec,
    cost,
    d_infty,
    extended_graph,
    feasibility,
    read_extended_csv,
    read_strict_csv,
    strict_graph,
    write_extended_csv,
    write_strict_csv,
)
from .normality import NormalityOptions, classify, fit_multipliers
from .plotting import gap_svg, process_svg
from .pmp import MultiplierSet, PmpTolerances, check_pmp
from .qualifications import QualificationOptions, check_all, no_gap_verdict
from .solver import NoFeasiblePointError, SolveOptions, solve

__all__ = ["RunConfig", "build_parser", "run", "main", "OUT_ENV"]

LOGGER = logging.getLogger("impgap")

OUT_ENV = "IMPGAP_OUT"
DEFAULT_OUT = "impgap-out"

EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE = 0, 1, 2


@dataclass
class RunConfig:
    """Parsed command line.

    ``problem`` is a built-in fixture name or a JSON path.  ``process`` and
    ``multipliers`` optionally replace the solved or reference extremal.
    """

    command: str
    problem: str | None = None
    out: Path = Path(DEFAULT_OUT)
    solve: SolveOptions = field(default_factory=SolveOptions)
    normality: NormalityOptions = field(default_factory=NormalityOptions)
    qualifications: QualificationOptions = field(default_factory=QualificationOptions)
    probe: ProbeOptions = field(default_factory=ProbeOptions)
    eps_list: tuple = DEFAULT_EPS
    delta: float = 0.5
    process: Path | None = None
    multipliers: Path | None = None
    input: Path | None = None
    output: Path | None = None
    analyse: str = "auto"
    plots: bool = True


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _eps_list(text: str) -> tuple:
    try:
        values = tuple(float(eval_fraction(v)) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad eps list {text!r}: {exc}") from exc
    if not values or any(not 0 < v < 1 for v in values):
        raise argparse.ArgumentTypeError("eps values must lie in (0, 1)")
    return values


def eval_fraction(text: str) -> float:
    """``"1/8"`` or ``"0.125"``."""
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _common(p: argparse.ArgumentParser, problem_required: bool = True) -> None:
    p.add_argument("--problem", required=problem_required, help=f"built-in name ({', '.join(sorted(FIXTURES))}) or problem JSON path")
    p.add_argument("--out", type=Path, default=None, help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    p.add_argument("--grid", type=int, default=400, help="number of pseudo-time cells")
    p.add_argument("--seed", type=int, default=0, help="base random seed")
    p.add_argument("--multistart", type=int, default=16, help="random solver starts")
    p.add_argument("--tol-feas", type=float, default=1e-8, help="solver constraint-violation tolerance")
    p.add_argument("--tol-kkt", type=float, default=1e-6, help="solver projected-gradient tolerance")
    p.add_argument("--tol-lp", type=float, default=1e-6, help="LP optimum counted as a nonzero multiplier")
    p.add_argument("--tol-pmp", type=float, default=1e-4, help="PMP defect, adjoint and Hamiltonian tolerance")
    p.add_argument("--tol-margin", type=float, default=1e-4, help="qualification margin threshold")
    p.add_argument("--tol-gap", type=float, default=1e-3, help="estimated gap treated as zero")
    p.add_argument("--no-plots", action="store_true", help="skip SVG output")
    p.add_argument("-v", "--verbose", action="store_true")


def _process_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--process", type=Path, default=None, help="extended-process CSV to analyse instead of solving")
    p.add_argument(
        "--analyse",
        choices=("auto", "reference", "solution"),
        default="auto",
        help="process to analyse when --process is absent: the fixture's reference minimizer or the solver output (auto: reference for fixtures)",
    )


def _probe_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eps-list", type=_eps_list, default=DEFAULT_EPS, help="comma-separated clock-rate floors, e.g. 1/4,1/8")
    p.add_argument("--delta", type=float, default=0.5, help="graph-distance radius around the anchor")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="impgap", description="Infimum-gap diagnostics for impulsive optimal control problems.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve the extended problem by direct transcription")
    _common(p)

    p = sub.add_parser("check-pmp", help="check the discrete maximum principle for a process and multipliers")
    _common(p)
    _process_args(p)
    p.add_argument("--multipliers", type=Path, default=None, help="multiplier JSON; default: fixture reference or a normal fit")

    p = sub.add_parser("classify", help="normal or abnormal extremal, by linear programming")
    _common(p)
    _process_args(p)

    p = sub.add_parser("check-qualifications", help="constraint and target qualifications plus the composite verdict")
    _common(p)
    _process_args(p)

    p = sub.add_parser("probe-gap", help="strict-restricted costs for decreasing clock-rate floors")
    _common(p)
    _process_args(p)
    _probe_args(p)

    p = sub.add_parser("run-example", help="full pipeline on a built-in problem")
    p.add_argument("name", choices=sorted(FIXTURES))
    _common(p, problem_required=False)
    _probe_args(p)
    p.add_argument("--analyse", choices=("reference", "solution"), default="reference", help="process fed to classification, qualifications and the probe")

    for name, what in (("embed", "strict CSV to extended CSV"), ("invert", "extended CSV to strict CSV")):
        p = sub.add_parser(name, help=what)
        p.add_argument("input", type=Path)
        p.add_argument("--output", type=Path, default=None)
        p.add_argument("--problem", default=None, help="optional problem, used to report the cost change")
        p.add_argument("--out", type=Path, default=None)
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    out = args.out or Path(os.environ.get(OUT_ENV, DEFAULT_OUT))
    cfg = RunConfig(command=args.command, problem=getattr(args, "problem", None), out=out)
    if args.command in ("embed", "invert"):
        cfg.input, cfg.output = args.input, args.output
        return cfg
    if args.command == "run-example":
        cfg.problem = args.name
    if args.grid < 1 or args.multistart < 0:
        raise InputError("--grid must be positive and --multistart nonnegative")
    cfg.solve = SolveOptions(cells=args.grid, multistart=args.multistart, seed=args.seed, feas_tol=args.tol_feas, kkt_tol=args.tol_kkt)
    pmp_tol = PmpTolerances(defect=args.tol_pmp, adjoint=args.tol_pmp, hamiltonian=args.tol_pmp)
    cfg.normality = NormalityOptions(threshold=args.tol_lp, pmp=pmp_tol)
    cfg.qualifications = QualificationOptions(delta=args.tol_margin)
    cfg.probe = ProbeOptions(solver=replace(cfg.solve, multistart=0), gap_tol=args.tol_gap)
    cfg.plots = not args.no_plots
    cfg.process = getattr(args, "process", None)
    cfg.multipliers = getattr(args, "multipliers", None)
    cfg.analyse = getattr(args, "analyse", "auto")
    if hasattr(args, "eps_list"):
        cfg.eps_list, cfg.delta = tuple(args.eps_list), float(args.delta)
        if cfg.delta <= 0:
            raise InputError("--delta must be positive")
    return cfg


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _envelope(kind: str, problem: ProblemSpec | None, cfg: RunConfig) -> dict:
    return {"kind": kind, "schema_version": SCHEMA_VERSION, "problem": problem.name if problem is not None else "", "version": __version__}


def _read_process(path: Path, problem: ProblemSpec) -> ExtendedProcess:
    try:
        proc = read_extended_csv(path)
    except (OSError, ValueError, IndexError, StopIteration) as exc:
        raise InputError(f"{path}: cannot read extended-process CSV: {exc}") from exc
    if proc.y.shape[1] != problem.n or proc.omega.shape[1] != problem.m or proc.alpha.shape[1] != problem.q:
        raise InputError(f"{path}: columns do not match the problem dimensions (n={problem.n}, m={problem.m}, q={problem.q})")
    return proc


def _solve(problem: ProblemSpec, cfg: RunConfig):
    try:
        return solve(problem, cfg.solve)
    except NoFeasiblePointError as exc:
        LOGGER.warning("%s", exc)
        return exc.result


def _write_process(cfg: RunConfig, stem: str, proc: ExtendedProcess, title: str) -> None:
    write_extended_csv(proc, cfg.out / f"{stem}.csv")
    if cfg.plots:
        (cfg.out / f"{stem}.svg").write_text(process_svg(proc, title), encoding="utf-8")


def _subject(problem: ProblemSpec, cfg: RunConfig) -> tuple[ExtendedProcess, str]:
    """Process to analyse and a label of where it came from."""
    if cfg.process is not None:
        return _read_process(cfg.process, problem), f"file:{cfg.process.name}"
    mode = cfg.analyse
    if mode == "auto":
        mode = "reference" if problem.name in FIXTURES else "solution"
    if mode == "reference":
        if problem.name not in FIXTURES:
            raise InputError(f"problem {problem.name!r} has no reference process; use --process or --analyse solution")
        return reference_process(problem, cfg.solve.cells), "reference"
    result = _solve(problem, cfg)
    if not result.feasible:
        raise ModelError(f"solver found no feasible process (violation {result.feasibility.worst:.3e})")
    return result.process, "solution"


def cmd_solve(problem: ProblemSpec, cfg: RunConfig) -> int:
    result = _solve(problem, cfg)
    report = _envelope("solve", problem, cfg)
    report["solve"] = result.to_json()
    write_report(cfg.out / "solve.json", report)
    _write_process(cfg, "solution", result.process, f"{problem.name}: solver output")
    return EXIT_OK if result.feasible else EXIT_INCONCLUSIVE


def cmd_check_pmp(problem: ProblemSpec, cfg: RunConfig) -> int:
    proc, origin = _subject(problem, cfg)
    if cfg.multipliers is not None:
        try:
            mult = MultiplierSet.from_json(json.loads(cfg.multipliers.read_text(encoding="utf-8")))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise InputError(f"{cfg.multipliers}: cannot read multipliers: {exc}") from exc
        source = f"file:{cfg.multipliers.name}"
    else:
        mult = load_fixture(problem.name).reference_multipliers(proc.M) if problem.name in FIXTURES and origin == "reference" else None
        source = "reference"
        if mult is None:
            fit = fit_multipliers(problem, proc, cfg.normality)
            mult, source = fit.multipliers, f"normal-fit (residual {fit.residual:.3e})"
    rep = check_pmp(problem, proc, mult, cfg.normality.pmp)
    report = _envelope("check-pmp", problem, cfg)
    report.update({"pmp": rep.to_json(), "multipliers_source": source, "process_source": origin, "multipliers": mult.to_json()})
    write_report(cfg.out / "check-pmp.json", report)
    return EXIT_OK if rep.passed else EXIT_INCONCLUSIVE


def cmd_classify(problem: ProblemSpec, cfg: RunConfig) -> int:
    proc, origin = _subject(problem, cfg)
    verdict = classify(problem, proc, cfg.normality)
    report = _envelope("classify", problem, cfg)
    report.update({"normality": verdict.to_json(), "process_source": origin})
    write_report(cfg.out / "classify.json", report)
    return EXIT_INCONCLUSIVE if verdict.verdict == "inconclusive" else EXIT_OK


def cmd_check_qualifications(problem: ProblemSpec, cfg: RunConfig) -> int:
    proc, origin = _subject(problem, cfg)
    qual = check_all(problem, proc, cfg.qualifications)
    verdict = no_gap_verdict(problem, proc, qual)
    report = _envelope("check-qualifications", problem, cfg)
    report.update({"qualifications": qual.to_json(), "verdict": verdict.to_json(), "process_source": origin})
    write_report(cfg.out / "check-qualifications.json", report)
    return EXIT_INCONCLUSIVE if verdict.verdict == "INCONCLUSIVE" else EXIT_OK


def _probe(problem: ProblemSpec, proc: ExtendedProcess, cfg: RunConfig):
    gap = probe(problem, proc, cfg.delta, cfg.eps_list, cfg.probe)
    (cfg.out / "gap.csv").write_text(gap.to_csv(), encoding="utf-8")
    if cfg.plots:
        (cfg.out / "gap.svg").write_text(gap_svg(gap.rows, gap.extended_objective, problem.name), encoding="utf-8")
    return gap


def cmd_probe_gap(problem: ProblemSpec, cfg: RunConfig) -> int:
    proc, origin = _subject(problem, cfg)
    gap = _probe(problem, proc, cfg)
    report = _envelope("probe-gap", problem, cfg)
    report.update({"gap": gap.to_json(), "process_source": origin})
    write_report(cfg.out / "probe-gap.json", report)
    return EXIT_OK


def cmd_run_example(problem: ProblemSpec, cfg: RunConfig) -> int:
    result = _solve(problem, cfg)
    _write_process(cfg, "solution", result.process, f"{problem.name}: solver output")
    ref = reference_process(problem, cfg.solve.cells)
    _write_process(cfg, "reference", ref, f"{problem.name}: reference minimizer")
    ref_feas = feasibility(problem, ref)
    if cfg.analyse == "solution":
        if not result.feasible:
            raise ModelError(f"solver found no feasible process (violation {result.feasibility.worst:.3e})")
        subject, origin = result.process, "solution"
    else:
        subject, origin = ref, "reference"
    normal = classify(problem, subject, cfg.normality)
    qual = check_all(problem, subject, cfg.qualifications)
    verdict = no_gap_verdict(problem, subject, qual, normal)
    gap = _probe(problem, subject, cfg)
    report = _envelope("run-example", problem, cfg)
    report.update(
        {
            "solve": result.to_json(),
            "reference": {
                "feasibility_worst": float(ref_feas.worst),
                "feasibility": ref_feas.to_json(),
                "objective": float(cost(problem, ref)),
                "d_infty_to_solution": float(d_infty(extended_graph(ref), extended_graph(result.process))),
            },
            "process_source": origin,
            "normality": normal.to_json(),
            "qualifications": qual.to_json(),
            "verdict": verdict.to_json(),
            "gap": gap.to_json(),
        }
    )
    write_report(cfg.out / "run-example.json", report)
    if verdict.verdict == "INCONCLUSIVE" or normal.verdict == "inconclusive":
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def cmd_embed(cfg: RunConfig) -> int:
    try:
        strict = read_strict_csv(cfg.input)
    except (OSError, ValueError, IndexError, StopIteration) as exc:
        raise InputError(f"{cfg.input}: cannot read strict-process CSV: {exc}") from exc
    ext = embed(strict)
    output = cfg.output or cfg.out / "extended.csv"
    write_extended_csv(ext, output)
    back = invert(ext)
    report = _envelope("embed", _optional_problem(cfg), cfg)
    report.update(
        {
            "input": str(cfg.input.name),
            "output": str(Path(output).name),
            "roundtrip_d_infty": d_infty(strict_graph(back), strict_graph(strict)),
            "cost_change": _cost_change(cfg, ext, embed(back)),
        }
    )
    write_report(cfg.out / "embed.json", report)
    return EXIT_OK


def cmd_invert(cfg: RunConfig) -> int:
    try:
        ext = read_extended_csv(cfg.input)
    except (OSError, ValueError, IndexError, StopIteration) as exc:
        raise InputError(f"{cfg.input}: cannot read extended-process CSV: {exc}") from exc
    strict = invert(ext)
    output = cfg.output or cfg.out / "strict.csv"
    write_strict_csv(strict, output)
    again = embed(strict)
    report = _envelope("invert", _optional_problem(cfg), cfg)
    report.update(
        {
            "input": str(cfg.input.name),
            "output": str(Path(output).name),
            "roundtrip_d_infty": d_infty(extended_graph(again), extended_graph(ext)),
            "cost_change": _cost_change(cfg, ext, again),
        }
    )
    write_report(cfg.out / "invert.json", report)
    return EXIT_OK


def _optional_problem(cfg: RunConfig) -> ProblemSpec | None:
    return load_problem(cfg.problem) if cfg.problem else None


def _cost_change(cfg: RunConfig, a: ExtendedProcess, b: ExtendedProcess) -> float | None:
    if not cfg.problem:
        return None
    problem = load_problem(cfg.problem)
    return float(abs(cost(problem, a) - cost(problem, b)))


COMMANDS = {
    "solve": cmd_solve,
    "check-pmp": cmd_check_pmp,
    "classify": cmd_classify,
    "check-qualifications": cmd_check_qualifications,
    "probe-gap": cmd_probe_gap,
    "run-example": cmd_run_example,
}


def run(cfg: RunConfig) -> int:
    """Execute one command; returns the exit status."""
    cfg.out.mkdir(parents=True, exist_ok=True)
    if cfg.command == "embed":
        return cmd_embed(cfg)
    if cfg.command == "invert":
        return cmd_invert(cfg)
    problem = load_problem(cfg.problem)
    return COMMANDS[cfg.command](problem, cfg)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        return run(cfg)
    except (InputError, ModelError, FastArcError, ValueError, OSError) as exc:
        print(f"impgap: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

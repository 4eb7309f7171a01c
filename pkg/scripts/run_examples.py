"""Run the full pipeline on every built-in problem and print a summary table.

Usage: python3 scripts/run_examples.py [--out DIR] [--grid N] [--analyse reference|solution]

Each problem gets its own subdirectory with the ``run-example`` report,
process CSVs, the gap table and SVG plots.
"""
from __future__ import annotations

import argparse
import json
import time
from pathlib import Path

from impgap.cli import main
from impgap.fixtures import FIXTURES


def _row(name: str, out: Path, code: int, seconds: float) -> str:
    data = json.loads((out / "run-example.json").read_text())
    gap = data["gap"]
    return " | ".join(
        [
            name,
            f"{data['solve']['objective']:+.2e}",
            data["normality"]["label"],
            data["verdict"]["verdict"],
            str(data["verdict"]["route"]),
            gap["verdict"],
            str(code),
            f"{seconds:.1f}",
        ]
    )


def run(out: Path, grid: int, analyse: str) -> list[str]:
    lines = ["problem | objective | normality | verdict | route | probe | exit | seconds"]
    for name in sorted(FIXTURES):
        target = out / name
        start = time.perf_counter()
        code = main(["run-example", name, "--grid", str(grid), "--analyse", analyse, "--out", str(target)])
        lines.append(_row(name, target, code, time.perf_counter() - start))
    return lines


def cli() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("impgap-out/examples"))
    parser.add_argument("--grid", type=int, default=400)
    parser.add_argument("--analyse", choices=("reference", "solution"), default="reference")
    args = parser.parse_args()
    lines = run(args.out, args.grid, args.analyse)
    print("\n".join(lines))
    (args.out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    cli()

"""Problem loading, report serialization and schema validation."""
from __future__ import annotations

import json
import os
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
from referencing import Registry, Resource

from .fixtures import FIXTURES, make_problem
from .model import ModelError, ProblemSpec

__all__ = [
    "InputError",
    "load_problem",
    "problem_schema",
    "report_validator",
    "validate_report",
    "to_jsonable",
    "dumps_report",
    "write_report",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1


class InputError(ValueError):
    """Malformed input file; the message names the file and the offending key."""


def _schema_text(name: str) -> str:
    return resources.files("impgap").joinpath("schemas", name).read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def _schema(name: str) -> dict:
    return json.loads(_schema_text(name))


def problem_schema() -> dict:
    return _schema("problem.json")


@lru_cache(maxsize=None)
def _registry() -> Registry:
    pairs = [(f"impgap/{n}", Resource.from_contents(_schema(n))) for n in ("common.json", "report.json", "problem.json")]
    return Registry().with_resources(pairs)


def report_validator() -> jsonschema.protocols.Validator:
    return jsonschema.Draft202012Validator(_schema("report.json"), registry=_registry())


def _where(err: jsonschema.ValidationError) -> str:
    return "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path) or "<root>"


def validate_report(data: dict) -> None:
    """Raise ``jsonschema.ValidationError`` unless ``data`` is a valid report."""
    report_validator().validate(data)


def load_problem(source: str | os.PathLike) -> ProblemSpec:
    """Built-in fixture by name, or a problem JSON file.

    Files are checked against the shipped schema first, so unknown keys and
    wrong types are reported with their location before parsing.
    """
    key = str(source)
    if key in FIXTURES:
        return make_problem(key)
    path = Path(source)
    if not path.is_file():
        raise InputError(f"{key}: not a built-in problem ({', '.join(sorted(FIXTURES))}) and not a file")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    errors = sorted(jsonschema.Draft202012Validator(problem_schema()).iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise InputError(f"{path}: problem{_where(err)}: {err.message}")
    try:
        return ProblemSpec.from_json(data)
    except (ModelError, ValueError, TypeError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become the strings ``inf``, ``-inf`` and ``nan``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dumps_report(data: dict) -> str:
    """Deterministic text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(to_jsonable(data), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_report(path: str | os.PathLike, data: dict, validate: bool = True) -> dict:
    clean = to_jsonable(data)
    if validate:
        validate_report(clean)
    Path(path).write_text(dumps_report(clean), encoding="utf-8")
    return clean

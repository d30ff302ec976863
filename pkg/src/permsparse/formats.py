"""JSON file formats: functions, marginals, reports.  Permutations are lists of
1-based images, matrix cells are 1-based, scalars are decimal (or p/q) strings."""

from __future__ import annotations

import json
from pathlib import Path

from .marginals import EXACT, MODES, MarginalMatrix, SparseSupportFunction, format_scalar, to_scalar
from .sparsestfit import Condition1Report
from .symgroup import LambdaShape, Permutation


class FormatError(ValueError):
    pass


def function_to_json(f: SparseSupportFunction) -> dict:
    return {
        "n": f.n,
        "mode": f.mode,
        "entries": [{"perm": list(p.images), "value": format_scalar(v)} for p, v in sorted(f.entries)],
    }


def function_from_json(obj: dict) -> SparseSupportFunction:
    try:
        n = int(obj["n"])
        mode = obj.get("mode", EXACT)
        if mode not in MODES:
            raise FormatError(f"unknown mode {mode!r}")
        entries = []
        for e in obj["entries"]:
            perm = Permutation(e["perm"])
            if perm.n != n:
                raise FormatError(f"permutation {list(perm.images)} is not on {n} elements")
            entries.append((perm, to_scalar(str(e["value"]), mode)))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed function file: {exc!r}") from exc
    return SparseSupportFunction(n, entries, mode)


def marginal_to_json(M: MarginalMatrix) -> dict:
    return {
        "n": M.n,
        "shape": list(M.shape.parts),
        "cells": [[int(i) + 1, int(j) + 1, format_scalar(v)]
                  for i, j, v in zip(M.rows.tolist(), M.cols.tolist(), M.value_list())],
    }


def marginal_from_json(obj: dict, mode: str = EXACT) -> MarginalMatrix:
    try:
        shape = LambdaShape(tuple(obj["shape"]))
        if "n" in obj and int(obj["n"]) != shape.n:
            raise FormatError(f"n = {obj['n']} does not match shape ({shape})")
        cells = {}
        for row, col, value in obj["cells"]:
            key = (int(row) - 1, int(col) - 1)
            if key in cells:
                raise FormatError(f"cell ({row}, {col}) listed twice")
            cells[key] = str(value)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"malformed marginal file: {exc!r}") from exc
    return MarginalMatrix.from_cells(shape, cells, mode)


def condition1_to_json(report: Condition1Report, f: SparseSupportFunction) -> dict:
    """Witnesses and coefficients are listed in the order of ``support``."""
    return {
        "holds": report.holds,
        "support": [list(p.images) for p in f.support],
        "unique_witness": [None if w is None else [w[0] + 1, w[1] + 1] for w in report.unique_witness],
        "linear_independence": report.linear_independence.to_json(),
    }


def read_json(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc


def dumps(obj) -> str:
    return json.dumps(obj, indent=1) + "\n"

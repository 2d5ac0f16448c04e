"""Reading and writing data matrices, label files and model files.

Data CSVs are plain decimal-point text. If the first row has any field that
does not parse as a number it is taken as a header. Label files hold one
label per row; a first row reading exactly ``label`` is treated as a header.
Model files are JSON documents; floats are written with ``repr`` precision
so a save/load cycle is exact.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .model import DataMatrix, MixtureParams

__all__ = [
    "InputError",
    "SCHEMA_VERSION",
    "read_matrix_csv",
    "write_matrix_csv",
    "read_labels",
    "write_labels",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
]

SCHEMA_VERSION = 1
_MISSING = {"", "na", "nan", "n/a", "null", "none", "?"}


class InputError(ValueError):
    """Malformed user input (file contents or values)."""


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_matrix_csv(path) -> DataMatrix:
    """Parse a numeric CSV into a `DataMatrix`.

    Raises `InputError` naming the 1-based file line and column of the
    first ragged row, missing cell or non-numeric value.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    lines = [(i + 1, r) for i, r in enumerate(rows) if r and any(c.strip() for c in r)]
    if not lines:
        raise InputError(f"{path} has no data rows")
    header = None
    first = [c.strip() for c in lines[0][1]]
    if not all(_is_number(c) or c.lower() in _MISSING for c in first):
        header = first
        lines = lines[1:]
    if not lines:
        raise InputError(f"{path} has a header but no data rows")
    width = len(header) if header is not None else len(lines[0][1])
    out = np.empty((len(lines), width))
    for k, (lineno, row) in enumerate(lines):
        if len(row) != width:
            raise InputError(f"row {lineno}: expected {width} fields, found {len(row)}")
        for j, cell in enumerate(row):
            cell = cell.strip()
            if cell.lower() in _MISSING:
                raise InputError(f"missing value at row {lineno}, column {j + 1}")
            try:
                out[k, j] = float(cell)
            except ValueError:
                raise InputError(f"non-numeric value {cell!r} at row {lineno}, column {j + 1}") from None
            if not np.isfinite(out[k, j]):
                raise InputError(f"non-finite value at row {lineno}, column {j + 1}")
    return DataMatrix(out, header)


def write_matrix_csv(path, values, column_names=None) -> None:
    values = np.asarray(values, dtype=float)
    names = column_names or [f"x{j + 1}" for j in range(values.shape[1])]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in values:
            w.writerow([repr(float(v)) for v in row])


def read_labels(path) -> list[str]:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if rows and len(rows[0]) == 1 and rows[0][0].strip().lower() == "label":
        rows = rows[1:]
    out = []
    for i, r in enumerate(rows):
        if len(r) != 1:
            raise InputError(f"{path}: label row {i + 1} has {len(r)} fields, expected 1")
        out.append(r[0].strip())
    if not out:
        raise InputError(f"{path} contains no labels")
    return out


def write_labels(path, labels) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write("label\n")
        for v in labels:
            fh.write(f"{v}\n")


def model_to_dict(params: MixtureParams, model: str = "mcstfa", fit: dict | None = None) -> dict:
    """JSON-ready description of a fitted or generating parameter set."""
    return {
        "schema_version": SCHEMA_VERSION,
        "model": model,
        "p": params.p,
        "q": params.q,
        "G": params.G,
        "weights": params.weights.tolist(),
        "loadings": params.loadings.tolist(),     # row-major, p rows of q
        "factor_means": params.factor_means.tolist(),
        "factor_skews": params.factor_skews.tolist(),
        "factor_covs": params.factor_covs.tolist(),
        "noise_diag": params.noise_diag.tolist(),
        "dof": params.dof.tolist(),
        "fit": fit or {},
    }


def model_from_dict(d: dict) -> tuple[MixtureParams, dict]:
    """Inverse of `model_to_dict`; returns ``(params, document)``."""
    if d.get("schema_version") != SCHEMA_VERSION:
        raise InputError(f"unsupported schema_version {d.get('schema_version')!r}")
    if d.get("model") not in ("mcstfa", "mctfa"):
        raise InputError(f"unknown model {d.get('model')!r}")
    try:
        params = MixtureParams(
            weights=d["weights"],
            loadings=np.asarray(d["loadings"], dtype=float).reshape(d["p"], d["q"]),
            factor_means=d["factor_means"],
            factor_skews=d["factor_skews"],
            factor_covs=d["factor_covs"],
            noise_diag=d["noise_diag"],
            dof=d["dof"],
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise InputError(f"invalid model file: {exc}") from exc
    if (params.p, params.q, params.G) != (d["p"], d["q"], d["G"]):
        raise InputError("model file dimensions do not match its arrays")
    return params, d


def save_model(path, params: MixtureParams, model: str = "mcstfa", fit: dict | None = None) -> None:
    doc = model_to_dict(params, model, fit)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n", encoding="utf-8")


def load_model(path) -> tuple[MixtureParams, dict]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read model file {path}: {exc}") from exc
    return model_from_dict(doc)

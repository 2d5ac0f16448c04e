"""BIC, adjusted Rand index and (G, q) grid model selection.

BIC here is ``2 * loglik - n_params * log(n)``: larger is better.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "bic",
    "contingency_table",
    "adjusted_rand_index",
    "SelectionGrid",
    "AllCellsFailedError",
    "select_model",
    "GRID_COLUMNS",
]

GRID_COLUMNS = ("G", "q", "loglik", "n_params", "bic", "converged", "iterations", "ari")


def bic(loglik: float, n_params: int, n: int) -> float:
    if n < 1 or n_params < 0:
        raise ValueError("need n >= 1 and n_params >= 0")
    return float(2.0 * loglik - n_params * np.log(n))


def contingency_table(labels_a, labels_b):
    """Cross-tabulation with rows indexed by `labels_a` and columns by `labels_b`.

    Returns ``(table, row_levels, col_levels)``; levels are sorted.
    """
    a = np.asarray(labels_a).ravel()
    b = np.asarray(labels_b).ravel()
    if a.shape != b.shape:
        raise ValueError(f"label vectors differ in length: {a.size} vs {b.size}")
    rows, ia = np.unique(a, return_inverse=True)
    cols, ib = np.unique(b, return_inverse=True)
    table = np.zeros((rows.size, cols.size), dtype=np.int64)
    np.add.at(table, (ia.ravel(), ib.ravel()), 1)
    return table, rows, cols


def _pairs(v):
    v = np.asarray(v, dtype=float)
    return v * (v - 1.0) / 2.0


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Hubert-Arabie adjusted Rand index between two partitions.

    Returns 1.0 when the index is undefined (both partitions trivial in the
    same way, e.g. one cluster each).
    """
    table, _, _ = contingency_table(labels_a, labels_b)
    return ari_from_table(table)


def ari_from_table(table) -> float:
    """Adjusted Rand index from a contingency table of counts."""
    table = np.asarray(table, dtype=float)
    n = table.sum()
    sum_ij = _pairs(table).sum()
    sum_a = _pairs(table.sum(axis=1)).sum()
    sum_b = _pairs(table.sum(axis=0)).sum()
    expected = sum_a * sum_b / _pairs(n) if n > 1 else 0.0
    denom = 0.5 * (sum_a + sum_b) - expected
    if denom == 0:
        return 1.0
    return float((sum_ij - expected) / denom)


class AllCellsFailedError(RuntimeError):
    """Every (G, q) cell of a selection grid raised during fitting."""


@dataclass
class SelectionGrid:
    g_values: list
    q_values: list
    results: dict = field(default_factory=dict)   # (G, q) -> FitResult
    errors: dict = field(default_factory=dict)    # (G, q) -> message
    best: tuple | None = None

    @property
    def best_result(self):
        return None if self.best is None else self.results[self.best]

    def rows(self, true_labels=None) -> list[dict]:
        """One row per cell, sorted by (G, q); failed cells have blank numbers."""
        out = []
        for G in sorted(self.g_values):
            for q in sorted(self.q_values):
                res = self.results.get((G, q))
                if res is None:
                    out.append(dict(G=G, q=q, loglik="", n_params="", bic="", converged="failed",
                                    iterations="", ari=""))
                    continue
                ari = "" if true_labels is None else adjusted_rand_index(true_labels, res.hard_labels)
                out.append(dict(G=G, q=q, loglik=res.loglik, n_params=res.n_params, bic=res.bic,
                                converged=res.converged, iterations=res.iterations, ari=ari))
        return out


def select_model(data, g_values, q_values, config=None, labels=None, n_jobs: int = 1,
                 require_converged: bool = True) -> SelectionGrid:
    """Fit every (G, q) cell and pick the converged fit with the largest BIC.

    Non-converged fits are kept in ``results`` but by default never chosen
    as best. ``require_converged=False`` ranks every completed fit, which is
    useful when a fixed cycle budget is used on purpose. Cells that raise
    (collapse, invalid sizes, singular systems) are recorded in ``errors``.
    """
    from .aecm import FitConfig, fit

    config = FitConfig() if config is None else config
    g_values, q_values = list(g_values), list(q_values)
    if not g_values or not q_values:
        raise ValueError("grids must be non-empty")
    cells = [(G, q) for G in sorted(g_values) for q in sorted(q_values)]

    def run(cell):
        G, q = cell
        try:
            return cell, fit(data, G, q, config, labels=labels), None
        except (ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
            return cell, None, f"{type(exc).__name__}: {exc}"

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(run, cells))
    else:
        outcomes = [run(c) for c in cells]

    grid = SelectionGrid(g_values, q_values)
    for cell, res, err in outcomes:
        if res is None:
            grid.errors[cell] = err
        else:
            grid.results[cell] = res
    if not grid.results:
        raise AllCellsFailedError("; ".join(f"{k}: {v}" for k, v in grid.errors.items()))
    eligible = [c for c in cells if c in grid.results and (grid.results[c].converged or not require_converged)]
    if eligible:
        grid.best = max(eligible, key=lambda c: grid.results[c].bic)
    return grid

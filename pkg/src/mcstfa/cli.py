"""Command-line interface: ``mcstfa fit | simulate | eval | params-table``.

Exit codes: 0 success, 2 bad input, 3 numerical failure, 4 no grid cell
converged. Every long option can also be given in a TOML file passed with
``--config``, either at top level or under a table named after the
subcommand (``[fit]``); options on the command line win over the file,
which wins over built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .aecm import FitConfig
from .fileio import (
    InputError,
    read_labels,
    read_matrix_csv,
    save_model,
    write_labels,
    write_matrix_csv,
)
from .metrics import GRID_COLUMNS, AllCellsFailedError, adjusted_rand_index, contingency_table, select_model
from .model import MODEL_IDS, parsimony_table
from .simulate import SimSpec, benchmark_spec, simulate

try:
    import tomllib
except ModuleNotFoundError:   # Python < 3.11
    import tomli as tomllib

__all__ = ["main", "build_parser", "parse_range"]

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_NOT_CONVERGED = 0, 2, 3, 4


class UsageError(Exception):
    """Bad flag values; reported with exit code 2."""


def parse_range(text: str, name: str = "range") -> list[int]:
    """``"4"`` -> ``[4]``; ``"1..5"`` -> ``[1, 2, 3, 4, 5]``."""
    s = str(text).strip()
    try:
        if ".." in s:
            lo, hi = (int(v) for v in s.split("..", 1))
        else:
            lo = hi = int(s)
    except ValueError:
        raise UsageError(f"{name}: expected an integer or a..b, got {text!r}") from None
    if lo > hi or lo < 1:
        raise UsageError(f"{name}: need 1 <= a <= b, got {text!r}")
    return list(range(lo, hi + 1))


def _err(msg: str) -> None:
    print(f"mcstfa: error: {msg}", file=sys.stderr)


# ---------------------------------------------------------------------------
# fit


def _fit_config(args) -> tuple[FitConfig, np.ndarray | None]:
    init = args.init
    start_labels = None
    if init.startswith("labels-file="):
        start_labels = read_labels(init.split("=", 1)[1])
        init = "labels"
    try:
        cfg = FitConfig(
            max_iter=args.max_iter, epsilon=args.tol, min_dof=args.min_dof, seed=args.seed,
            init_method=init, model=args.model, restarts=args.restarts,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if start_labels is not None:
        _, inverse = np.unique(start_labels, return_inverse=True)
        start_labels = inverse.ravel()
    return cfg, start_labels


def _write_grid(path, grid, true_labels) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=GRID_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in grid.rows(true_labels):
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in row.items()})


def cmd_fit(args) -> int:
    if not args.data:
        raise UsageError("fit needs a data CSV")
    data = read_matrix_csv(args.data)
    g_values = parse_range(args.components, "--components")
    q_values = parse_range(args.factors, "--factors")
    if max(q_values) >= data.cols:
        raise UsageError(f"--factors must stay below the number of columns ({data.cols})")
    cfg, start_labels = _fit_config(args)
    if start_labels is not None and start_labels.size != data.rows:
        raise UsageError(f"starting labels have {start_labels.size} entries, data has {data.rows} rows")
    true_labels = None
    if args.labels:
        true_labels = read_labels(args.labels)
        if len(true_labels) != data.rows:
            raise UsageError(f"--labels has {len(true_labels)} entries, data has {data.rows} rows")
    threads = args.threads or os.cpu_count() or 1

    try:
        grid = select_model(data, g_values, q_values, cfg, labels=start_labels, n_jobs=threads,
                            require_converged=not args.allow_unconverged)
    except AllCellsFailedError as exc:
        _err(f"every grid cell failed: {exc}")
        return EXIT_NUMERIC
    for cell, msg in sorted(grid.errors.items()):
        print(f"cell G={cell[0]} q={cell[1]} failed: {msg}", file=sys.stderr)
    if args.grid_out:
        _write_grid(args.grid_out, grid, true_labels)
    if grid.best is None:
        _err("no grid cell converged; rerun with a larger --max-iter, a looser --tol "
             "or --allow-unconverged")
        return EXIT_NOT_CONVERGED

    res = grid.best_result
    meta = {
        "loglik": res.loglik, "bic": res.bic, "n_params": res.n_params,
        "iterations": res.iterations, "converged": res.converged, "seed": cfg.seed,
        "config": {k: getattr(cfg, k) for k in cfg.__dataclass_fields__},
    }
    save_model(args.out, res.params, cfg.model, meta)
    labels_out = args.labels_out or str(Path(args.out).with_suffix("")) + "_labels.csv"
    write_labels(labels_out, res.hard_labels.tolist())
    G, q = grid.best
    print(f"best G={G} q={q} loglik={res.loglik:.4f} BIC={res.bic:.4f} "
          f"iterations={res.iterations} converged={res.converged}")
    if true_labels is not None:
        print(f"ARI={adjusted_rand_index(true_labels, res.hard_labels):.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def _prefixed(prefix: str, name: str) -> Path:
    path = Path(prefix + name)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def cmd_simulate(args) -> int:
    if bool(args.spec) == bool(args.paper_4_2):
        raise UsageError("give exactly one of --spec and --paper-4-2")
    try:
        if args.paper_4_2:
            spec = benchmark_spec(seed=args.seed if args.seed is not None else 0)
        else:
            try:
                doc = json.loads(Path(args.spec).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise InputError(f"cannot read spec {args.spec}: {exc}") from exc
            if args.seed is not None:
                doc["seed"] = args.seed
            spec = SimSpec.from_dict(doc)
        result = simulate(spec)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid simulation spec: {exc}") from exc
    prefix = args.out_prefix
    write_matrix_csv(_prefixed(prefix, "data.csv"), result.data.values)
    write_labels(_prefixed(prefix, "labels.csv"), result.labels.tolist())
    save_model(_prefixed(prefix, "params.json"), result.params, "mcstfa")
    _prefixed(prefix, "spec.json").write_text(json.dumps(result.spec.to_dict(), indent=2) + "\n", encoding="utf-8")
    print(f"wrote {result.data.rows} x {result.data.cols} data to {prefix}data.csv")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval


def format_confusion(true_labels, pred_labels) -> str:
    table, rows, cols = contingency_table(true_labels, pred_labels)
    head = ["true\\pred"] + [str(c) for c in cols]
    body = [[str(r)] + [str(v) for v in line] for r, line in zip(rows, table)]
    width = max(len(s) for line in [head] + body for s in line)
    return "\n".join(" ".join(s.rjust(width) for s in line) for line in [head] + body)


def cmd_eval(args) -> int:
    pred = read_labels(args.pred)
    true = read_labels(args.true)
    if len(pred) != len(true):
        raise InputError(f"label files differ in length: {len(true)} true vs {len(pred)} predicted")
    print(format_confusion(true, pred))
    print(f"ARI={adjusted_rand_index(true, pred):.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# params-table


def cmd_params_table(args) -> int:
    p_values = parse_range(args.p_range, "--p-range")
    if args.q < 1 or args.g < 1:
        raise UsageError("--q and --g must be >= 1")
    if args.q > p_values[0]:
        raise UsageError("--q must not exceed the smallest p")
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    try:
        rows = parsimony_table(p_values, args.q, args.g, models)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "p", "q", "G", "n_params"])
        for model, p, count in rows:
            w.writerow([model, p, args.q, args.g, count])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcstfa", description="Mixtures of common skew-t factor analyzers.")
    sub = parser.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a (G, q) grid and keep the best model by BIC")
    f.add_argument("data", nargs="?", help="n x p numeric CSV")
    f.add_argument("--components", default="1..3", help="G or Gmin..Gmax (default 1..3)")
    f.add_argument("--factors", default="1..3", help="q or qmin..qmax (default 1..3)")
    f.add_argument("--model", choices=("mcstfa", "mctfa"), default="mcstfa")
    f.add_argument("--tol", type=float, default=FitConfig.epsilon, help="Aitken tolerance")
    f.add_argument("--max-iter", type=int, default=FitConfig.max_iter)
    f.add_argument("--min-dof", type=float, default=FitConfig.min_dof)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--init", default=FitConfig.init_method,
                   help="hclust-complete | hclust-ward | hclust-average | labels-file=PATH")
    f.add_argument("--restarts", type=int, default=0, help="extra starts from perturbed labels")
    f.add_argument("--labels", help="true labels; prints the ARI of the best fit")
    f.add_argument("--out", default="model.json")
    f.add_argument("--labels-out", help="hard labels CSV (default: <out>_labels.csv)")
    f.add_argument("--grid-out", help="per-cell results CSV")
    f.add_argument("--threads", type=int, default=None, help="grid cells fitted concurrently (default: cores)")
    f.add_argument("--allow-unconverged", action="store_true",
                   help="let fits that hit --max-iter compete for best BIC")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="draw data from a simulation spec")
    s.add_argument("--spec", help="spec JSON (as written by a previous run)")
    s.add_argument("--paper-4-2", action="store_true", help="built-in four-component benchmark design")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out-prefix", default="", help="path prefix for data.csv, labels.csv, params.json, spec.json")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("eval", help="confusion table and ARI of two label files")
    e.add_argument("--pred", required=True)
    e.add_argument("--true", required=True)
    e.set_defaults(func=cmd_eval)

    t = sub.add_parser("params-table", help="free-parameter counts over a range of p")
    t.add_argument("--p-range", default="10..200")
    t.add_argument("--q", type=int, default=2)
    t.add_argument("--g", type=int, default=3)
    t.add_argument("--models", default="UUU,CUU,CCC,MCStFA", help=f"comma list from {','.join(MODEL_IDS)}")
    t.add_argument("--out", help="CSV path (default: standard output)")
    t.set_defaults(func=cmd_params_table)

    for p in (f, s, e, t):
        p.add_argument("--config", help="TOML file with option defaults")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    try:
        with open(args.config, "rb") as fh:
            doc = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise InputError(f"cannot read config {args.config}: {exc}") from exc
    values = {k: v for k, v in doc.items() if not isinstance(v, dict)}
    values.update(doc.get(args.command, {}))
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in sub._actions}
    settings = {}
    for key, value in values.items():
        dest = key.replace("-", "_")
        if dest not in known or dest in ("help", "config", "func"):
            raise UsageError(f"unknown option {key!r} in {args.config}")
        if known[dest].choices is not None and value not in known[dest].choices:
            raise UsageError(f"{key}: {value!r} is not one of {list(known[dest].choices)}")
        settings[dest] = value
    sub.set_defaults(**settings)
    for action in sub._actions:
        if action.dest in settings and action.required:
            action.required = False
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except (InputError, UsageError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    except (ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        _err(f"numerical failure: {type(exc).__name__}: {exc}")
        return EXIT_NUMERIC


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()

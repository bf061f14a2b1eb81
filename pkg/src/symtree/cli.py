"""Command-line entry point.

Subcommands:

    symtree fit DATA.csv --out model.json
    symtree benchmark --ids F1,F9 --seed 1 --out report.csv
    symtree polyrec --dims 1,2 --orders 1,2,3 --bases 1,2 --trials 5 --out table.csv
    symtree predict model.json DATA.csv

Exit codes: 0 success, 2 usage or validation error, 3 data error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np

from .benchmarks import (
    BENCHMARK_IDS,
    PolySpec,
    benchmark,
    poly_cell_valid,
    random_polynomial,
    recovered,
    sample,
)
from .errors import EmptyDataError, IndeterminateTermError, InvalidArgumentError, SymTreeError
from .it import Dataset, Expression, eval_expression, expression_size, render
from .regression import mae
from .rng import XorShift64Star, derive_seed
from .search import SearchConfig, desk_grid, full_grid, grid_search

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

REPORT_COLUMNS = ("id", "tau", "min_i", "min_t", "extra_iters", "train_mae", "test_mae",
                  "n_terms", "expr_size", "wall_ms", "expr")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def format_mae(value: float) -> str:
    if not math.isfinite(value):
        return "nan"
    return f"{value:.6g}"


@dataclass(frozen=True)
class RunReport:
    id: str
    config: SearchConfig
    train_mae: float
    test_mae: float
    n_terms: int
    expr_size: int
    wall_ms: int
    expression: Expression

    def row(self) -> list[str]:
        cfg = self.config
        return [self.id, f"{cfg.tau:g}", str(cfg.min_i), str(cfg.min_t), str(cfg.extra_iters),
                format_mae(self.train_mae), format_mae(self.test_mae), str(self.n_terms),
                str(self.expr_size), str(self.wall_ms), render(self.expression)]


def write_report(reports: Sequence[RunReport], fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for rep in reports:
        writer.writerow(rep.row())


# ---------------------------------------------------------------------------
# Parsing helpers
# ---------------------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def read_table(path: str) -> tuple[list[str] | None, np.ndarray]:
    """Numeric CSV as a matrix; a non-numeric first row is taken as header."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}")
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    header = None
    if rows and not all(_is_number(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
    width = len(header) if header is not None else (len(rows[0]) if rows else 0)
    for lineno, r in enumerate(rows, start=2 if header else 1):
        if len(r) != width:
            raise UsageError(f"{path}: row {lineno} has {len(r)} fields, expected {width}")
    try:
        M = np.array([[float(c) for c in r] for r in rows], dtype=np.float64).reshape(len(rows), width)
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}")
    return header, M


def _target_index(header: list[str] | None, width: int, spec: str | None) -> int:
    if spec is None:
        return width - 1
    if header is not None and spec in header:
        return header.index(spec)
    try:
        idx = int(spec)
    except ValueError:
        raise UsageError(f"unknown target column {spec!r}")
    if idx < 0:
        idx += width
    if not 0 <= idx < width:
        raise UsageError(f"target column {spec} out of range for {width} columns")
    return idx


def load_dataset(path: str, target_col: str | None = None) -> Dataset:
    header, M = read_table(path)
    if M.shape[1] < 2:
        raise UsageError(f"{path}: need at least one feature column and a target column")
    j = _target_index(header, M.shape[1], target_col)
    if not np.all(np.isfinite(M)):
        raise DataError(f"{path}: data contains non-finite values")
    if M.shape[0] == 0:
        raise DataError(f"{path}: no data rows")
    return Dataset(np.delete(M, j, axis=1), M[:, j])


def split(data: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded random split; a zero fraction uses all rows for both roles."""
    if not 0.0 <= test_fraction < 1.0:
        raise UsageError("--test-fraction must be in [0, 1)")
    n_test = int(round(test_fraction * data.n))
    if n_test == 0:
        return data, data
    if n_test >= data.n:
        raise DataError("not enough rows to hold out a test split")
    perm = XorShift64Star(seed).permutation(data.n)
    return data.subset(np.sort(perm[n_test:])), data.subset(np.sort(perm[:n_test]))


def _grid(args) -> list[SearchConfig]:
    caps = dict(max_terms_per_node=args.max_terms, max_leaves=args.max_leaves)
    single = (args.tau, args.min_i, args.min_t, args.it)
    if any(v is not None for v in single):
        base = SearchConfig()
        return [SearchConfig(
            tau=base.tau if args.tau is None else args.tau,
            min_i=base.min_i if args.min_i is None else args.min_i,
            min_t=base.min_t if args.min_t is None else args.min_t,
            extra_iters=base.extra_iters if args.it is None else args.it,
            **caps)]
    return full_grid(**caps) if args.full_grid else desk_grid(**caps)


def _search(id: str, train: Dataset, test: Dataset, grid: list[SearchConfig],
            timing: bool) -> RunReport:
    start = time.perf_counter()
    cfg, node = grid_search(train, grid)
    elapsed = int(round((time.perf_counter() - start) * 1000)) if timing else 0
    expr = node.expression
    # both errors go through the same evaluation path as `predict`; the
    # held-out data is touched once, after the winner is fixed
    return RunReport(id, cfg, mae(expr, train), mae(expr, test), len(expr.terms),
                     expression_size(expr), elapsed, expr)


def _open_out(path: str | None):
    if path is None or path == "-":
        return None
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _emit(text: str, path: str | None) -> None:
    p = _open_out(path)
    if p is None:
        sys.stdout.write(text)
    else:
        p.write_text(text)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_fit(args) -> int:
    data = load_dataset(args.data, args.target_col)
    train, test = split(data, args.test_fraction, args.seed)
    rep = _search(Path(args.data).name, train, test, _grid(args), args.timing)
    if args.out:
        _emit(rep.expression.to_json(indent=2) + "\n", args.out)
    if args.report:
        buf = io.StringIO()
        write_report([rep], buf)
        _emit(buf.getvalue(), args.report)
    print(render(rep.expression))
    print(f"train_mae={format_mae(rep.train_mae)} test_mae={format_mae(rep.test_mae)} "
          f"n_terms={rep.n_terms} expr_size={rep.expr_size}")
    return EXIT_OK


def _parse_ids(text: str) -> list[str]:
    ids = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            ids.append(benchmark(tok).id)
        except InvalidArgumentError:
            raise UsageError(f"unknown benchmark id {tok!r}; valid ids: {', '.join(BENCHMARK_IDS)}")
    if not ids:
        raise UsageError("--ids is empty")
    return ids


def cmd_benchmark(args) -> int:
    ids = _parse_ids(args.ids)
    grid = _grid(args)
    reports = []
    for bid in ids:
        train, test = sample(benchmark(bid), derive_seed(args.seed, BENCHMARK_IDS.index(bid)))
        rep = _search(bid, train, test, grid, args.timing)
        reports.append(rep)
        if args.models_dir:
            d = Path(args.models_dir)
            d.mkdir(parents=True, exist_ok=True)
            (d / f"{bid}.json").write_text(rep.expression.to_json(indent=2) + "\n")
        if args.verbose:
            print(f"{bid}: test_mae={format_mae(rep.test_mae)} {render(rep.expression)}", file=sys.stderr)
    buf = io.StringIO()
    write_report(reports, buf)
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def polyrec_counts(dims: Sequence[int], orders: Sequence[int], bases: Sequence[int], trials: int,
                   seed: int, grid: list[SearchConfig]) -> dict[tuple[int, int, int], int]:
    """Recovered-trial counts per valid (dim, order, base) cell."""
    counts = {}
    for dim in dims:
        for order in orders:
            for base in bases:
                if not poly_cell_valid(dim, order, base):
                    continue
                hits = 0
                for trial in range(trials):
                    spec = PolySpec(dim, order, base, seed=derive_seed(seed, dim, order, base, trial))
                    target, train, _ = random_polynomial(spec)
                    _, node = grid_search(train, grid)
                    hits += recovered(node.expression, target)
                counts[(dim, order, base)] = hits
    return counts


def polyrec_table(dims, orders, bases, trials, counts) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dim", "order"] + [f"base_{b}" for b in bases])
    for dim in dims:
        for order in orders:
            cells = []
            for base in bases:
                hit = counts.get((dim, order, base))
                cells.append("" if hit is None or trials == 0 else f"{hit}/{trials}")
            writer.writerow([dim, order] + cells)
    return buf.getvalue()


def cmd_polyrec(args) -> int:
    for name, values, allowed in (("--dims", args.dims, (1, 2, 3)), ("--orders", args.orders, (1, 2, 3, 4)),
                                  ("--bases", args.bases, (1, 2, 3, 4))):
        bad = [v for v in values if v not in allowed]
        if bad or not values:
            raise UsageError(f"{name} values must be drawn from {allowed}, got {values}")
    if args.trials < 0:
        raise UsageError("--trials must be >= 0")
    counts = polyrec_counts(args.dims, args.orders, args.bases, args.trials, args.seed, _grid(args))
    _emit(polyrec_table(args.dims, args.orders, args.bases, args.trials, counts), args.out)
    return EXIT_OK


def cmd_predict(args) -> int:
    try:
        expr = Expression.from_json(Path(args.model).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {args.model}: {exc.strerror or exc}")
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"{args.model}: not a model file ({exc})")
    header, M = read_table(args.data)
    if M.shape[1] not in (expr.dim, expr.dim + 1):
        raise UsageError(f"model expects {expr.dim} features, {args.data} has {M.shape[1]} columns")
    X = M[:, :expr.dim]
    pred = eval_expression(expr, X) if len(X) else np.empty(0)
    buf = io.StringIO()
    buf.write("prediction\n")
    for v in pred:
        buf.write(f"{v:.17g}\n" if math.isfinite(v) else "nan\n")
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _search_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--full-grid", action="store_true", help="use the full 1350-configuration grid")
    p.add_argument("--tau", type=float, help="run a single configuration with this tau")
    p.add_argument("--min-i", type=int, help="single configuration: inverse-operator gate")
    p.add_argument("--min-t", type=int, help="single configuration: transformation-operator gate")
    p.add_argument("--it", type=int, help="single configuration: extra iterations")
    p.add_argument("--max-terms", type=int, help="cap on filtered candidates per expansion")
    p.add_argument("--max-leaves", type=int, help="cap on leaves kept per iteration")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="symtree", description="Interaction-Transformation symbolic regression")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a CSV dataset")
    p.add_argument("data")
    p.add_argument("--out", help="model JSON path")
    p.add_argument("--report", help="report CSV path")
    p.add_argument("--test-fraction", type=float, default=0.5)
    p.add_argument("--target-col", help="target column name or index (default: last)")
    p.add_argument("--timing", action="store_true", help="record wall time in the report")
    _search_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("benchmark", help="run analytic benchmarks")
    p.add_argument("--ids", default=",".join(BENCHMARK_IDS))
    p.add_argument("--out", help="report CSV path (default: stdout)")
    p.add_argument("--models-dir", help="write one model JSON per benchmark here")
    p.add_argument("--timing", action="store_true", help="record wall time in the report")
    p.add_argument("-v", "--verbose", action="store_true")
    _search_flags(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("polyrec", help="random polynomial recovery table")
    p.add_argument("--dims", type=_int_list, default=[1, 2, 3])
    p.add_argument("--orders", type=_int_list, default=[1, 2, 3, 4])
    p.add_argument("--bases", type=_int_list, default=[1, 2, 3, 4])
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--out", help="table CSV path (default: stdout)")
    _search_flags(p)
    p.set_defaults(func=cmd_polyrec)

    p = sub.add_parser("predict", help="evaluate a saved model on a CSV")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--out", help="predictions CSV path (default: stdout)")
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"symtree: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, EmptyDataError) as exc:
        print(f"symtree: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InvalidArgumentError as exc:
        print(f"symtree: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IndeterminateTermError, FloatingPointError, np.linalg.LinAlgError, SymTreeError) as exc:
        print(f"symtree: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``qpad {fit,transform,evaluate,sweep,selfcheck}``.

Exit codes: 0 success, 1 failed check, 2 usage or validation error.
Any option may also come from ``--config FILE`` (``key = value`` lines, keys
named like the long flags); explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import dataset_io
from .dataset_io import Dataset, DatasetFormatError, SplitSpec
from .evaluation import (
    BASELINES,
    METHODS,
    RecallReport,
    RecallRow,
    SweepGrid,
    exact_knn,
    random_projection_fit,
    recall_at_k,
    run_sweep,
    target_dim,
)
from .linalg import QpadConfig, load_model, save_model, transform
from .naive import DEFAULT_NAIVE_CAP, NaiveCapExceeded
from .optimizer import ENGINES, fit, write_axis_dump, write_traces
from .selfcheck import run_selfcheck

logger = logging.getLogger("qpad")

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2
_BOOL_KEYS = {"has_header", "normalize", "force_naive", "timings", "quick"}


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in str(text).split(",") if v.strip()]


def _names(text: str) -> list[str]:
    return [v.strip() for v in str(text).split(",") if v.strip()]


def read_config_file(path) -> dict:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    text = Path(path).read_text()
    parser.read_string("[__top__]\n" + text)
    out = {}
    for section in parser.sections():
        for key, value in parser[section].items():
            key = key.strip().lstrip("-").replace("-", "_")
            if key in _BOOL_KEYS:
                out[key] = value.strip().lower() in ("1", "true", "yes", "on")
            else:
                out[key] = value.strip()
    return out


def _add_dataset_args(p):
    p.add_argument("--input", help="dataset file")
    p.add_argument("--format", choices=dataset_io.FORMATS, help="default: guessed from extension")
    p.add_argument("--has-header", action="store_true", help="CSV has a header row")
    p.add_argument("--delimiter", default=",", help="CSV delimiter; 'whitespace' for blank-separated")
    p.add_argument("--normalize", action="store_true", help="L2-normalize every row")
    p.add_argument("--subsample-dims", type=int, help="keep this many random columns")
    p.add_argument("--subsample-seed", type=int, default=0)


def _add_qpad_args(p):
    p.add_argument("--b", type=float, default=70.0, help="percent of smallest gaps per axis")
    p.add_argument("--alpha", type=float, default=1.0, help="orthogonality penalty weight")
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--grad-tol", type=float, default=1e-6)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qpad", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = sub.choices

    p = sub.add_parser("fit", help="fit a projection model")
    p.add_argument("--config")
    _add_dataset_args(p)
    _add_qpad_args(p)
    p.add_argument("--m", type=int, required=False, help="target dimension")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--engine", choices=ENGINES, default="fast")
    p.add_argument("--force-naive", action="store_true", help="allow the naive engine above the cap")
    p.add_argument("--naive-cap", type=int, default=DEFAULT_NAIVE_CAP)
    p.add_argument("--out", required=False, help="model file to write")
    p.add_argument("--dump-axis-eval", help="CSV of delta_star, R, B, mu per iteration")
    p.add_argument("--trace-dir", help="directory for per-axis iteration traces")

    p = sub.add_parser("transform", help="project a dataset with a fitted model")
    p.add_argument("--config")
    _add_dataset_args(p)
    p.add_argument("--model", required=False)
    p.add_argument("--out", required=False)
    p.add_argument("--out-format", choices=("csv", "fvecs"))

    p = sub.add_parser("evaluate", help="Recall@k of a model or baseline on held-out queries")
    p.add_argument("--config")
    _add_dataset_args(p)
    p.add_argument("--model", help="fitted model file (omit with --method rp)")
    p.add_argument("--method", choices=METHODS, default="qpad")
    p.add_argument("--m", type=int, help="target dimension for baselines")
    p.add_argument("--drr", type=float, help="target/input dimension ratio for baselines")
    p.add_argument("--queries", type=int, default=300, help="held-out query count")
    p.add_argument("--query-input", help="separate query file (same format)")
    p.add_argument("--k", type=_ints, default=[1, 10])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--timings", action="store_true", help="write wall-clock columns")
    p.add_argument("--out", required=False)

    p = sub.add_parser("sweep", help="grid over drr, k, alpha, b and methods")
    p.add_argument("--config")
    _add_dataset_args(p)
    _add_qpad_args(p)
    p.add_argument("--drr", type=_floats, default=list(SweepGrid.drr_list))
    p.add_argument("--k", type=_ints, default=list(SweepGrid.k_list))
    p.add_argument("--alphas", type=_floats, default=list(SweepGrid.alpha_list))
    p.add_argument("--bs", type=_floats, default=list(SweepGrid.b_list))
    p.add_argument("--methods", type=_names, default=["qpad", "rp"])
    p.add_argument("--queries", type=int, default=300)
    p.add_argument("--query-input")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, help="default: $QPAD_THREADS or 1")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--timings", action="store_true")
    p.add_argument("--out", required=False)
    p.add_argument("--winners-out")

    p = sub.add_parser("selfcheck", help="run the oracle, gradient and ascent checks")
    p.add_argument("--config")
    p.add_argument("--quick", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--selfcheck-sabotage", action="store_true", help=argparse.SUPPRESS)
    return parser


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        path = args.config
        if not os.path.exists(path):
            parser.error(f"config file not found: {path}")
        sub = parser.subcommands[args.command]
        known = set(vars(args))
        values = read_config_file(path)
        unknown = sorted(set(values) - known)
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        sub.set_defaults(**values)
        args = parser.parse_args(argv)
    return args


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) is None:
            raise UsageError(f"--{name.replace('_', '-')} is required")


def _load(args, path=None) -> Dataset:
    if path is None:
        _require(args, "input")
        path = args.input
    if not os.path.exists(path):
        raise UsageError(f"input file not found: {path}")
    ds = dataset_io.load(path, args.format, has_header=args.has_header, delimiter=args.delimiter)
    if args.subsample_dims:
        ds = dataset_io.subsample_columns(ds, args.subsample_dims, args.subsample_seed)
    if args.normalize:
        ds = dataset_io.l2_normalize(ds)
    return ds


def _config(args, m) -> QpadConfig:
    return QpadConfig(
        m=m,
        b_percent=args.b,
        alpha=args.alpha,
        max_iters_per_axis=args.max_iters,
        grad_tol=args.grad_tol,
        seed=args.seed,
        restarts_per_axis=args.restarts,
    )


def cmd_fit(args) -> int:
    _require(args, "m", "out")
    ds = _load(args)
    if args.m > ds.n:
        raise UsageError(f"--m {args.m} exceeds the data dimension {ds.n}")
    config = _config(args, args.m)
    if args.engine == "naive" and ds.N > args.naive_cap and not args.force_naive:
        raise NaiveCapExceeded(
            f"naive engine refuses N={ds.N} > cap {args.naive_cap}; pass --force-naive to override"
        )
    t0 = time.perf_counter()
    model, traces = fit(ds, config, engine=args.engine)
    elapsed = time.perf_counter() - t0
    save_model(model, args.out)
    if args.dump_axis_eval:
        write_axis_dump(traces, args.dump_axis_eval)
    if args.trace_dir:
        write_traces(traces, args.trace_dir)
    print(f"fitted m={model.m} n={model.n} N={ds.N} engine={args.engine} in {elapsed:.3f}s")
    for k, tr in enumerate(traces):
        print(f"  axis {k}: phi={tr.final_phi:.6g} iters={len(tr.iterations) - 1} stop={tr.stop_reason}")
    print(f"model written to {args.out}")
    return EXIT_OK


def cmd_transform(args) -> int:
    _require(args, "model", "out")
    if not os.path.exists(args.model):
        raise UsageError(f"model file not found: {args.model}")
    model = load_model(args.model)
    ds = _load(args)
    z = transform(model, ds)
    fmt = args.out_format or ("fvecs" if str(args.out).endswith(".fvecs") else "csv")
    if fmt == "fvecs":
        dataset_io.write_fvecs(args.out, z)
    else:
        dataset_io.write_csv(args.out, z)
    print(f"wrote {z.shape[0]} x {z.shape[1]} to {args.out}")
    return EXIT_OK


def _train_queries(args, ds):
    if args.query_input:
        return ds, _load(args, args.query_input)
    if not 1 <= args.queries < ds.N - 1:
        raise UsageError(f"--queries must lie in [1, {ds.N - 2}] for {ds.N} rows")
    return dataset_io.split(ds, SplitSpec(args.queries, args.seed))


def cmd_evaluate(args) -> int:
    _require(args, "out")
    ds = _load(args)
    train, queries = _train_queries(args, ds)
    ks = sorted(set(args.k))
    if ks[0] < 1 or ks[-1] > train.N:
        raise UsageError(f"--k values must lie in [1, {train.N}] (train size)")
    if args.method in BASELINES:
        if args.m is None and args.drr is None:
            raise UsageError("baselines need --m or --drr")
        m = args.m if args.m is not None else target_dim(args.drr, train.n)
        if not 1 <= m <= train.n:
            raise UsageError(f"target dimension {m} outside [1, {train.n}]")
        variant = "sparse" if args.method == "rp-sparse" else "gaussian"

        def make():
            return random_projection_fit(train.n, m, args.seed, variant)

        alpha = b = None
    else:
        _require(args, "model")
        if not os.path.exists(args.model):
            raise UsageError(f"model file not found: {args.model}")
        loaded = load_model(args.model)
        if loaded.n != train.n:
            raise UsageError(f"model expects {loaded.n} columns, data has {train.n}")

        def make():
            return load_model(args.model)

        alpha = loaded.config_echo.get("alpha")
        b = loaded.config_echo.get("b_percent")

    fit_times, tr_times = [], []
    for _ in range(max(1, args.repeats)):
        t0 = time.perf_counter()
        model = make()
        fit_times.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        z_train, z_query = transform(model, train), transform(model, queries)
        tr_times.append(time.perf_counter() - t0)
    truth = exact_knn(train, queries, ks[-1])
    reduced = exact_knn(z_train, z_query, ks[-1])
    drr = model.m / train.n
    report = RecallReport(
        [
            RecallRow(
                args.method, drr, k, alpha, b, recall_at_k(truth, reduced, k),
                float(np.median(fit_times)), float(np.median(tr_times)),
            )
            for k in ks
        ]
    )
    report.write_csv(args.out, timings=args.timings)
    for row in report.rows:
        print(f"{row.method} drr={row.drr:.4g} k={row.k} recall={row.recall:.4f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    _require(args, "out")
    for meth in args.methods:
        if meth not in METHODS:
            raise UsageError(f"unknown method {meth!r}; choose from {', '.join(METHODS)}")
    ds = _load(args)
    train, queries = _train_queries(args, ds)
    if max(args.k) > train.N:
        raise UsageError(f"--k values must not exceed the train size {train.N}")
    workers = args.workers or int(os.environ.get("QPAD_THREADS", "1") or 1)
    grid = SweepGrid(args.drr, args.k, args.alphas, args.bs)
    report = run_sweep(
        train,
        grid,
        args.methods,
        args.seed,
        queries=queries,
        base_config=_config(args, 1),
        workers=max(1, workers),
        repeats=max(1, args.repeats),
    )
    report.write_csv(args.out, timings=args.timings)
    if args.winners_out:
        report.write_winners(args.winners_out)
    failed = sum(r.error is not None for r in report.rows)
    print(f"{len(report.rows)} rows written to {args.out}" + (f" ({failed} failed)" if failed else ""))
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    t0 = time.perf_counter()
    results = run_selfcheck(quick=args.quick, seed=args.seed, sabotage=args.selfcheck_sabotage)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}")
    print(f"selfcheck finished in {time.perf_counter() - t0:.2f}s")
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK


COMMANDS = {
    "fit": cmd_fit,
    "transform": cmd_transform,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "selfcheck": cmd_selfcheck,
}


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, NaiveCapExceeded, DatasetFormatError, FileNotFoundError, ValueError) as exc:
        print(f"qpad {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

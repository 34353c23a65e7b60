"""
Command-line entry point.

    fssmsc synth --clusters 3 --views 2 --dims 20,15 --per-cluster 100 --out ds/
    fssmsc run ds/ --landmarks 30 --label-ratio 0.1 --out results/
    fssmsc sweep ds/ --lambda-z 0.01,0.05 --lambda-m 1e2,1e3 --beta 0,1e-3 --out sweep.csv
    fssmsc check

Exit status: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

from . import data, diagnostics, pipeline, solver

REPORT_FIELDS = (
    "variant", "config", "dataset", "metrics", "iterations", "final_stopc",
    "seconds_solve", "seconds_total", "trace_path",
)


class StageError(RuntimeError):
    def __init__(self, stage, exc):
        super().__init__(f"{stage} failed: {exc}")
        self.stage = stage


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _int_list(text):
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _float_list(text):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty grid")
    return vals


def _add_model_flags(p, grids=False):
    num = _float_list if grids else float
    p.add_argument("--landmarks", type=int, default=100, help="number of landmarks m")
    p.add_argument("--label-ratio", type=float, default=0.05, help="fraction of labeled samples")
    p.add_argument("--lambda-z", type=num, default=[0.05] if grids else 0.05)
    p.add_argument("--lambda-m", type=num, default=[1e3] if grids else 1e3)
    p.add_argument("--beta", type=num, default=[1e-3] if grids else 1e-3)
    p.add_argument("--lambda", dest="lam", type=float, default=100.0, help="augmented-Lagrangian penalty")
    p.add_argument("--lambda0", type=float, default=100.0, help="penalty on q = Z Z^T 1")
    p.add_argument("--max-iter", type=int, default=30)
    p.add_argument("--stop-tol", type=float, default=0.0, help="stop when StopC <= tol (0: run max-iter)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--normalize", action="store_true", help="z-score every feature before fitting")


def build_parser():
    parser = argparse.ArgumentParser(prog="fssmsc", description=__doc__.split("\n")[1])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic union-of-subspaces dataset")
    p.add_argument("--clusters", type=int, default=3)
    p.add_argument("--views", type=int, default=2)
    p.add_argument("--dims", type=_int_list, default=[20, 15])
    p.add_argument("--subspace-dim", type=int, default=2)
    p.add_argument("--per-cluster", type=int, default=100)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("run", help="fit on a dataset and report metrics")
    p.add_argument("dataset")
    _add_model_flags(p)
    p.add_argument("--out", default="fssmsc-run", help="directory for report.json and trace.csv")
    p.add_argument("--trace", default=None, help="trace CSV path (default OUT/trace.csv)")

    p = sub.add_parser("sweep", help="grid search over lambda-z, lambda-m, beta")
    p.add_argument("dataset")
    _add_model_flags(p, grids=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="sweep.csv")

    p = sub.add_parser("check", help="run gradient, trace-ratio, feasibility and descent checks")
    p.add_argument("dataset", nargs="?", default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="penalty for the descent check (default: just above the descent threshold)")
    p.add_argument("--landmarks", type=int, default=12)
    p.add_argument("--label-ratio", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _config(args, lambda_z, lambda_m, beta):
    return solver.SolverConfig(
        lambda_Z=lambda_z, lambda_M=lambda_m, beta=beta, lam=args.lam, lambda_0=args.lambda0,
        max_iter=args.max_iter, stop_tol=args.stop_tol, seed=args.seed,
    )


def _validate_model_flags(parser, args):
    if args.landmarks < 1:
        parser.error("--landmarks must be >= 1")
    if not 0 < args.label_ratio <= 1:
        parser.error("--label-ratio must lie in (0, 1]")
    if args.max_iter < 0:
        parser.error("--max-iter must be >= 0")
    if args.stop_tol < 0:
        parser.error("--stop-tol must be >= 0")
    if args.seed < 0:
        parser.error("--seed must be >= 0")
    for flag, vals in (("--lambda-z", args.lambda_z), ("--lambda-m", args.lambda_m), ("--beta", args.beta)):
        vals = vals if isinstance(vals, list) else [vals]
        if flag == "--beta" and min(vals) < 0 or flag != "--beta" and min(vals) <= 0:
            parser.error(f"{flag} out of range")
    if args.lam <= 0 or args.lambda0 <= 0:
        parser.error("--lambda and --lambda0 must be > 0")


def _load(path):
    try:
        return data.load_dataset(path)
    except (data.DatasetError, OSError) as exc:
        raise StageError("load", exc) from exc


def _prepare(args, ds):
    try:
        return pipeline.prepare(ds, args.label_ratio, args.landmarks, args.seed, args.normalize)
    except (data.DatasetError, ValueError) as exc:
        raise StageError("prepare", exc) from exc


def _fit(ds, lm, cs, cfg, t_start):
    try:
        return pipeline.fit_prepared(ds, lm, cs, cfg, t_start)
    except (solver.SolverError, ValueError, FloatingPointError) as exc:
        raise StageError("solve", exc) from exc


def make_report(res: pipeline.FitResult, cfg, trace_path):
    ds = res.dataset
    return {
        "variant": "FSSMSC*" if cfg.beta == 0 else "FSSMSC",
        "config": asdict(cfg.resolved(ds.n)),
        "dataset": {"n": ds.n, "V": ds.n_views, "dims": ds.dims, "n_ell": ds.n_ell, "k": ds.k,
                    "m": res.landmarks.m},
        "metrics": res.metrics,
        "iterations": res.diagnostics.iterations,
        "final_stopc": res.diagnostics.stopc[-1] if res.diagnostics.stopc else None,
        "seconds_solve": res.seconds_solve,
        "seconds_total": res.seconds_total,
        "trace_path": None if trace_path is None else str(trace_path),
    }


def _fmt(x):
    return "nan" if x is None else f"{x:.4f}"


def cmd_synth(args, parser):
    if args.noise < 0:
        parser.error("--noise must be >= 0")
    if len(args.dims) != args.views:
        parser.error(f"--dims lists {len(args.dims)} dimensions but --views is {args.views}")
    if args.seed < 0:
        parser.error("--seed must be >= 0")
    try:
        spec = data.SyntheticSpec(args.clusters, args.subspace_dim, tuple(args.dims),
                                  args.per_cluster, args.noise, args.seed)
    except ValueError as exc:
        parser.error(str(exc))
    ds = data.generate_synthetic(spec)
    try:
        data.save_dataset(ds, args.out)
    except OSError as exc:
        raise StageError("write", exc) from exc
    print(f"wrote {ds.n} samples, {ds.n_views} views to {args.out}")
    return 0


def cmd_run(args, parser):
    _validate_model_flags(parser, args)
    t_start = time.perf_counter()
    ds, lm, cs = _prepare(args, _load(args.dataset))
    cfg = _config(args, args.lambda_z, args.lambda_m, args.beta)
    res = _fit(ds, lm, cs, cfg, t_start)
    out = Path(args.out)
    trace_path = Path(args.trace) if args.trace else out / "trace.csv"
    report = make_report(res, cfg, trace_path)
    try:
        res.diagnostics.write_csv(trace_path)
        _atomic_write(out / "report.json", json.dumps(report, indent=2) + "\n")
    except OSError as exc:
        raise StageError("write", exc) from exc
    m = report["metrics"]
    print(f"{report['variant']}: n={ds.n} n_ell={ds.n_ell} m={lm.m} iters={report['iterations']} "
          f"acc={_fmt(m['acc'])} nmi={_fmt(m['nmi'])} ari={_fmt(m['ari'])} "
          f"solve={res.seconds_solve:.2f}s")
    return 0


SWEEP_COLUMNS = ["lambda_m", "lambda_z", "beta", "acc", "nmi", "ari", "iterations", "final_stopc", "seconds"]


def _sweep_point(payload):
    ds, lm, cs, cfg = payload
    res = pipeline.fit_prepared(ds, lm, cs, cfg)
    return {
        "lambda_m": cfg.lambda_M, "lambda_z": cfg.lambda_Z, "beta": cfg.beta,
        **res.metrics,
        "iterations": res.diagnostics.iterations,
        "final_stopc": res.diagnostics.stopc[-1] if res.diagnostics.stopc else None,
        "seconds": res.seconds_solve,
    }


def cmd_sweep(args, parser):
    _validate_model_flags(parser, args)
    if args.jobs < 1:
        parser.error("--jobs must be >= 1")
    ds, lm, cs = _prepare(args, _load(args.dataset))
    grid = sorted(itertools.product(args.lambda_m, args.lambda_z, args.beta))
    payloads = [(ds, lm, cs, _config(args, lz, lmb, b)) for lmb, lz, b in grid]
    try:
        if args.jobs == 1:
            rows = [_sweep_point(p) for p in payloads]
        else:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                rows = list(pool.map(_sweep_point, payloads))
    except (solver.SolverError, ValueError, FloatingPointError) as exc:
        raise StageError("solve", exc) from exc
    rows.sort(key=lambda r: (r["lambda_m"], r["lambda_z"], r["beta"]))

    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r[k] is None else repr(float(r[k])) if isinstance(r[k], float) else r[k])
                    for k in SWEEP_COLUMNS})
    try:
        _atomic_write(Path(args.out), buf.getvalue())
    except OSError as exc:
        raise StageError("write", exc) from exc

    scored = [r for r in rows if r["acc"] is not None]
    if scored:
        best = max(scored, key=lambda r: r["acc"])  # first maximum in sorted order
        print("best: " + " ".join(f"{k}={best[k]}" for k in SWEEP_COLUMNS))
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def builtin_check_dataset():
    """Small seeded instance used by ``check`` when no dataset is given."""
    return data.generate_synthetic(data.SyntheticSpec(3, 2, (8, 6), 20, 0.05, 0))


def cmd_check(args, parser):
    if args.lam is not None and args.lam <= 0:
        parser.error("--lambda must be > 0")
    ds = builtin_check_dataset() if args.dataset is None else _load(args.dataset)
    try:
        ds, lm, cs = pipeline.prepare(ds, args.label_ratio, args.landmarks, args.seed)
    except (data.DatasetError, ValueError) as exc:
        raise StageError("prepare", exc) from exc
    cfg = solver.SolverConfig(seed=args.seed)
    results = diagnostics.run_checks(ds, lm, cs, cfg, lam=args.lam, seed=args.seed)
    for r in results:
        print(r.line())
    return 1 if any(r.status == diagnostics.FAIL for r in results) else 0


COMMANDS = {"synth": cmd_synth, "run": cmd_run, "sweep": cmd_sweep, "check": cmd_check}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args, parser)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: ``gen``, ``select``, ``detect`` and ``bench``.

Exit codes are 0 on success, 1 on runtime or I/O failure and 2 on bad usage.
Every file is written to a temporary sibling first and renamed into place,
so an interrupted run never leaves a truncated output behind.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import tempfile
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .anomaly import TypicalModel, atypicality, train_typical
from .evaluation import METHODS, f1_score, run_benchmark
from .glasso import GlassoConfig
from .graph import Graph
from .graph_codec import CoderKind, IncompatibleDimension
from .mdl_select import select_model
from .synthetic import StructureKind, make_structure, sample_mvn

PRESETS = {
    "table1-desk": {"kinds": [k.value for k in StructureKind], "sizes": [(40, 80)]},
    "table2-desk": {"kinds": [k.value for k in StructureKind], "sizes": [(40, 20)]},
}
BENCH_COLUMNS = {"cv": "CV", "bic": "BIC", "ebic": "EBIC",
                 "degree": "Degree", "iid": "IID", "triangle": "Triangle"}
CODERS = [k.value for k in CoderKind]


class UsageError(Exception):
    """Invalid combination of arguments (exit code 2)."""


class RunError(Exception):
    """Runtime or I/O failure (exit code 1)."""


def fmt(v: float) -> str:
    """17 significant digits, enough for an exact double round trip."""
    return format(float(v), ".17g")


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_matrix_csv(x: np.ndarray) -> str:
    return "".join(",".join(fmt(v) for v in row) + "\n" for row in np.atleast_2d(x))


def read_matrix_csv(path) -> np.ndarray:
    """Read a headerless numeric CSV; ragged or non-numeric content is an error."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise RunError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if not rows:
        raise RunError(f"{path}: no data rows")
    width = len(rows[0])
    for i, r in enumerate(rows, start=1):
        if len(r) != width:
            raise RunError(f"{path}: row {i} has {len(r)} fields, expected {width}")
    try:
        x = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise RunError(f"{path}: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise RunError(f"{path}: non-finite values")
    return x


def read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise RunError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise RunError(f"{path}: invalid JSON ({exc})") from exc


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def envelope(args, **payload) -> dict:
    """Output JSON skeleton carrying seed, version and resolved configuration."""
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "jobs")}
    return {"seed": args.seed, "version": __version__, "config": cfg, **payload}


def _default_jobs() -> int:
    raw = os.environ.get("GGM_JOBS")
    if raw is None:
        return 1
    try:
        jobs = int(raw)
    except ValueError:
        raise UsageError(f"GGM_JOBS must be an integer, got {raw!r}") from None
    return jobs


def _maybe_center(x: np.ndarray, center: bool) -> np.ndarray:
    return x - x.mean(axis=0) if center else x


# --- gen -------------------------------------------------------------------

def cmd_gen(args) -> int:
    if args.p < 1 or args.n < 1:
        raise UsageError("--p and --n must be positive")
    try:
        gt = make_structure(args.structure, args.p, seed=args.seed, trial=args.trial)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    x = sample_mvn(gt, args.n, seed=args.seed, trial=args.trial)
    out = Path(args.out_dir)
    truth = envelope(args, structure=gt.kind.value, p=gt.p,
                     edges=[list(e) for e in gt.graph.sorted_edges()],
                     omega=gt.omega.tolist())
    atomic_write(out / "data.csv", format_matrix_csv(x))
    atomic_write(out / "truth.json", dump_json(truth))
    print(f"wrote {out / 'data.csv'} ({args.n}x{args.p}) and {out / 'truth.json'}")
    return 0


# --- select ----------------------------------------------------------------

def _resolve_grid(args) -> tuple[int, list | None]:
    if args.lambdas is not None:
        if any(not math.isfinite(v) or v < 0 for v in args.lambdas):
            raise UsageError("--lambda values must be finite and nonnegative")
        if args.grid is not None and args.grid != len(args.lambdas):
            raise UsageError(f"--grid {args.grid} does not match {len(args.lambdas)} --lambda values")
        lambdas = sorted(args.lambdas, reverse=True)
        return len(lambdas), lambdas
    grid = 50 if args.grid is None else args.grid
    if grid < 2:
        raise UsageError("--grid must be >= 2 unless --lambda is given")
    return grid, None


def _truth_graph(path, p: int) -> Graph:
    t = read_json(path)
    try:
        g = Graph.from_edges(int(t["p"]), t["edges"])
    except (KeyError, TypeError, ValueError) as exc:
        raise RunError(f"{path}: not a truth file ({exc})") from exc
    if g.p != p:
        raise RunError(f"{path}: truth has p={g.p}, data has p={p}")
    return g


def cmd_select(args) -> int:
    grid, lambdas = _resolve_grid(args)
    x = _maybe_center(read_matrix_csv(args.data), args.center)
    if x.shape[0] < 2 or x.shape[1] < 2:
        raise RunError(f"{args.data}: need at least 2 rows and 2 columns, got {x.shape}")
    truth = _truth_graph(args.truth, x.shape[1]) if args.truth else None
    res = select_model(x, grid, args.coder, GlassoConfig(), lambdas)
    payload = res.to_dict()
    if truth is not None:
        payload["f1"] = asdict(f1_score(res.graph, truth))
    atomic_write(args.out, dump_json(envelope(args, selection=payload)))
    print(f"best_lambda={fmt(res.best_lambda)} edges={res.graph.n_edges} "
          f"total_bits={res.best.total_bits:.6f}")
    if truth is not None:
        print(f"f1={payload['f1']['f1']:.6f}")
    return 0


# --- detect ----------------------------------------------------------------

def _score_batch(job):
    batch_id, x, model_dict, threshold, grid = job
    m = TypicalModel.from_dict(model_dict)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s = atypicality(x, m, threshold=threshold, grid_size=grid)
    return {"batch_id": batch_id, **s.to_dict()}


def _batches(path, x: np.ndarray, size: int | None):
    if size is None:
        yield f"{path}:0", x
        return
    for k, start in enumerate(range(0, len(x), size)):
        yield f"{path}:{k}", x[start:start + size]


def cmd_detect(args) -> int:
    grid, _ = _resolve_grid(args)
    if args.train is not None:
        x = _maybe_center(read_matrix_csv(args.train), args.center)
        m = train_typical(x, args.coder, GlassoConfig(), grid)
        atomic_write(args.model, dump_json(envelope(args, model=m.to_dict())))
        print(f"trained typical model: p={m.p} edges={m.graph.n_edges} "
              f"lambda={fmt(m.best_lambda)} -> {args.model}")
        return 0

    if args.batch_size is not None and args.batch_size < 2:
        raise UsageError("--batch-size must be >= 2")
    doc = read_json(args.model)
    try:
        model = TypicalModel.from_dict(doc["model"])
    except (KeyError, TypeError, ValueError) as exc:
        raise RunError(f"{args.model}: not a model file ({exc})") from exc
    jobs = []
    for path in args.score:
        x = _maybe_center(read_matrix_csv(path), args.center)
        if x.shape[1] != model.p:
            raise RunError(f"{path}: data has p={x.shape[1]}, model expects p={model.p}")
        for bid, b in _batches(path, x, args.batch_size):
            if len(b) < 2:
                print(f"skipping {bid}: fewer than 2 rows", file=sys.stderr)
                continue
            jobs.append((bid, b, model.to_dict(), args.threshold, grid))
    n_jobs = args.jobs if args.jobs is not None else _default_jobs()
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_score_batch, jobs))
    else:
        results = [_score_batch(j) for j in jobs]
    meta = {"seed": args.seed, "version": __version__}
    lines = "".join(json.dumps({**r, **meta}) + "\n" for r in results)
    if args.out:
        atomic_write(args.out, lines)
    else:
        sys.stdout.write(lines)
    n_anom = sum(r["anomalous"] for r in results)
    print(f"scored {len(results)} batches, {n_anom} anomalous", file=sys.stderr)
    return 0


# --- bench -----------------------------------------------------------------

def _parse_sizes(text: str) -> list[tuple[int, int]]:
    sizes = []
    for item in text.split(","):
        try:
            p, n = item.lower().split("x")
            sizes.append((int(p), int(n)))
        except ValueError:
            raise UsageError(f"bad size {item!r}; expected PxN, e.g. 40x80") from None
    return sizes


def _resolve_bench(args):
    preset = PRESETS[args.preset] if args.preset else {}
    kinds = args.kinds.split(",") if args.kinds else preset.get("kinds")
    sizes = _parse_sizes(args.sizes) if args.sizes else preset.get("sizes")
    if not kinds or not sizes:
        raise UsageError("give --preset or both --kinds and --sizes")
    try:
        kinds = [StructureKind.parse(k).value for k in kinds]
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    methods = args.methods.split(",") if args.methods else list(METHODS)
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise UsageError(f"unknown method(s) {bad}; choose from {list(METHODS)}")
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    if args.grid < 2:
        raise UsageError("--grid must be >= 2")
    for p, n in sizes:
        if p < 3 or n < 2:
            raise UsageError(f"size {p}x{n}: need p >= 3 and N >= 2")
    jobs = args.jobs if args.jobs is not None else _default_jobs()
    if jobs < 1:
        raise UsageError("--jobs must be >= 1")
    return kinds, sizes, methods, jobs


def format_bench_csv(rows, kinds, sizes, methods) -> str:
    table = {(r.kind, r.p, r.n, r.method): r.mean_f1 for r in rows}
    out = ["Type,p,N," + ",".join(BENCH_COLUMNS.values())]
    for k in kinds:
        label = StructureKind.parse(k).label
        for p, n in sizes:
            cells = [fmt(table[(k, p, n, m)]) if m in methods else "" for m in BENCH_COLUMNS]
            out.append(",".join([label, str(p), str(n), *cells]))
    return "\n".join(out) + "\n"


def cmd_bench(args) -> int:
    kinds, sizes, methods, jobs = _resolve_bench(args)

    def progress(done, total, r):
        status = "failed" if r.failed else " ".join(f"{m}={v:.2f}" for m, v in r.f1.items())
        print(f"[{done}/{total}] {r.kind} p={r.p} N={r.n} trial={r.trial} {status}",
              file=sys.stderr)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rows, results = run_benchmark(kinds, sizes, methods, args.trials, args.seed,
                                      jobs, args.grid, progress)
    csv_text = format_bench_csv(rows, kinds, sizes, methods)
    json_path = args.json or str(Path(args.out).with_suffix(".json"))
    detail = envelope(args, resolved={"kinds": kinds, "sizes": sizes, "methods": methods},
                      rows=[asdict(r) for r in rows], trials=[asdict(r) for r in results])
    atomic_write(args.out, csv_text)
    atomic_write(json_path, dump_json(detail))
    sys.stdout.write(csv_text)
    return 0


# --- wiring ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ggmdl", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic data set and its true graph")
    g.add_argument("--structure", required=True, choices=[k.value for k in StructureKind])
    g.add_argument("--p", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--trial", type=int, default=0)
    g.add_argument("--out-dir", default=".")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("select", help="pick a graph by minimum description length")
    s.add_argument("data", help="headerless CSV, rows are samples")
    s.add_argument("--coder", choices=CODERS, default="degree")
    s.add_argument("--grid", type=int, default=None, help="number of penalties (default 50)")
    s.add_argument("--lambda", dest="lambdas", type=float, nargs="+", default=None,
                   help="explicit penalty value(s) instead of the default grid")
    s.add_argument("--truth", help="truth.json from gen; prints the F1 score")
    s.add_argument("--center", action="store_true", help="subtract column means first")
    s.add_argument("--seed", type=int, default=0, help="recorded in the output")
    s.add_argument("--out", default="selection.json")
    s.set_defaults(func=cmd_select)

    d = sub.add_parser("detect", help="train a typical model or score batches against it")
    mode = d.add_mutually_exclusive_group(required=True)
    mode.add_argument("--train", metavar="CSV", help="fit the typical model on this data")
    mode.add_argument("--score", metavar="CSV", nargs="+", help="score these data files")
    d.add_argument("--model", required=True, help="model JSON (written by --train, read by --score)")
    d.add_argument("--coder", choices=CODERS, default="degree")
    d.add_argument("--grid", type=int, default=None)
    d.add_argument("--batch-size", type=int, default=None,
                   help="split each scored file into consecutive batches of this many rows")
    d.add_argument("--threshold", type=float, default=0.0,
                   help="a batch is anomalous when its score is below this")
    d.add_argument("--center", action="store_true")
    d.add_argument("--jobs", type=int, default=None)
    d.add_argument("--seed", type=int, default=0, help="recorded in the output")
    d.add_argument("--out", help="JSON-lines output (default: standard output)")
    d.set_defaults(func=cmd_detect, lambdas=None)

    b = sub.add_parser("bench", help="Monte Carlo F1 benchmark of all selectors")
    b.add_argument("--preset", choices=sorted(PRESETS))
    b.add_argument("--kinds", help="comma-separated structures, e.g. cycle,ar1")
    b.add_argument("--sizes", help="comma-separated PxN pairs, e.g. 40x80,40x20")
    b.add_argument("--methods", help=f"comma-separated subset of {','.join(METHODS)}")
    b.add_argument("--trials", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--jobs", type=int, default=None, help="worker processes (default $GGM_JOBS or 1)")
    b.add_argument("--grid", type=int, default=50)
    b.add_argument("--out", default="bench.csv")
    b.add_argument("--json", help="per-trial detail (default: CSV path with .json)")
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ggmdl {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (RunError, IncompatibleDimension) as exc:
        print(f"ggmdl {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"ggmdl {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

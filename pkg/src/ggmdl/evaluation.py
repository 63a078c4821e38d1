"""Edge-recovery metrics, baseline penalty selectors and the Monte Carlo benchmark."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .glasso import GlassoConfig, NotConverged, glasso_path
from .graph import Graph
from .graph_codec import CoderKind
from .mdl_select import (
    DataBitsCache,
    LambdaPath,
    LambdaRecord,
    SelectionResult,
    fit_path,
    mdl_selection,
)
from .numerics import DimensionMismatch, cholesky, log_det_spd, sample_covariance
from .synthetic import StructureKind, make_structure, sample_mvn

__all__ = [
    "F1Report",
    "f1_score",
    "select_bic",
    "select_ebic",
    "select_cv",
    "METHODS",
    "BenchmarkRow",
    "TrialResult",
    "run_trial",
    "run_benchmark",
]

METHODS = ("cv", "bic", "ebic", "degree", "iid", "triangle")


@dataclass(frozen=True)
class F1Report:
    precision: float
    recall: float
    f1: float
    n_true: int
    n_estimated: int
    n_correct: int


def f1_score(estimated: Graph, truth: Graph) -> F1Report:
    """Edge-set precision, recall and their harmonic mean.

    Empty denominators count as zero precision (or recall).
    """
    if estimated.p != truth.p:
        raise DimensionMismatch(f"graphs have p={estimated.p} and p={truth.p}")
    correct = len(estimated.edges & truth.edges)
    precision = correct / estimated.n_edges if estimated.n_edges else 0.0
    recall = correct / truth.n_edges if truth.n_edges else 0.0
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return F1Report(precision, recall, f1, truth.n_edges, estimated.n_edges, correct)


def _neg_loglik(s: np.ndarray, omega: np.ndarray) -> float:
    """``tr(S Omega) - log det Omega``."""
    return float(np.sum(s * omega)) - log_det_spd(cholesky(omega))


def _n_offdiag(omega: np.ndarray, tau: float) -> int:
    nz = np.abs(omega) > tau
    np.fill_diagonal(nz, False)
    return int(nz.sum()) // 2


def _resolve_path(d, path, grid_size, cfg, lambdas) -> tuple[np.ndarray, LambdaPath]:
    x = np.asarray(d, dtype=float)
    if path is None:
        path = fit_path(x, grid_size, cfg, lambdas)
    return x, path


def select_bic(d, path: LambdaPath | None = None, cfg: GlassoConfig = GlassoConfig(),
               *, grid_size: int = 50, lambdas=None, gamma: float = 0.0,
               method: str = "bic") -> SelectionResult:
    """BIC over the penalty grid, ``N [tr(S Omega) - log det Omega] + k log N``.

    ``k`` counts nonzero off-diagonal pairs. A positive ``gamma`` adds the
    extended-BIC term ``4 gamma k log p``.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    x, path = _resolve_path(d, path, grid_size, cfg, lambdas)
    n, p = x.shape
    s = sample_covariance(x)
    records = []
    for lam, est, g in zip(path.lambdas, path.estimates, path.graphs):
        k = _n_offdiag(est.omega, cfg.zero_threshold)
        score = n * _neg_loglik(s, est.omega) + math.log(n) * k + 4.0 * gamma * k * math.log(p)
        records.append(LambdaRecord(float(lam), g, score, converged=est.converged))
    return SelectionResult(method, records, degenerate=path.degenerate)


def select_ebic(d, path: LambdaPath | None = None, cfg: GlassoConfig = GlassoConfig(),
                gamma: float = 0.5, *, grid_size: int = 50, lambdas=None) -> SelectionResult:
    """Extended BIC; ``gamma = 0`` reduces to :func:`select_bic`."""
    return select_bic(d, path, cfg, grid_size=grid_size, lambdas=lambdas, gamma=gamma,
                      method="ebic")


def select_cv(d, path: LambdaPath | None = None, cfg: GlassoConfig = GlassoConfig(),
              folds: int = 5, *, grid_size: int = 50, lambdas=None) -> SelectionResult:
    """K-fold cross-validation of the held-out Gaussian negative log-likelihood.

    Folds are contiguous blocks of rows. Every fold refits the graphical
    lasso on the same grid as ``path``; the reported graph for each penalty
    is the full-data one.
    """
    x, path = _resolve_path(d, path, grid_size, cfg, lambdas)
    n = x.shape[0]
    if not 2 <= folds <= n:
        raise ValueError(f"need 2 <= folds <= N, got folds={folds}, N={n}")
    blocks = np.array_split(np.arange(n), folds)
    loss = np.zeros(len(path.lambdas))
    for block in blocks:
        train = np.delete(x, block, axis=0)
        s_val = sample_covariance(x[block])
        s_train = sample_covariance(train)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NotConverged)
            ests = glasso_path(s_train, path.lambdas, cfg)
        loss += [_neg_loglik(s_val, e.omega) for e in ests]
    loss /= folds
    records = [LambdaRecord(float(lam), g, float(l), converged=est.converged)
               for lam, g, est, l in zip(path.lambdas, path.graphs, path.estimates, loss)]
    return SelectionResult("cv", records, degenerate=path.degenerate)


@dataclass
class TrialResult:
    kind: str
    p: int
    n: int
    trial: int
    f1: dict
    edges: dict
    best_lambda: dict
    n_unconverged: int
    failed: bool = False
    error: str = ""


def run_trial(kind, p: int, n: int, trial: int, seed: int, methods=METHODS,
              grid_size: int = 50, cfg: GlassoConfig = GlassoConfig()) -> TrialResult:
    """One Monte Carlo replication: generate, fit one shared path, run every selector."""
    kind = StructureKind.parse(kind)
    gt = make_structure(kind, p, seed=seed, trial=trial)
    x = sample_mvn(gt, n, seed=seed, trial=trial)
    path = fit_path(x, grid_size, cfg)
    unconverged = sum(not e.converged for e in path.estimates)
    if unconverged == len(path.estimates):
        return TrialResult(kind.value, p, n, trial, {}, {}, {}, unconverged, True,
                           "no penalty converged")
    cache = DataBitsCache(x)
    f1, edges, lam = {}, {}, {}
    for m in methods:
        if m == "cv":
            res = select_cv(x, path, cfg)
        elif m == "bic":
            res = select_bic(x, path, cfg)
        elif m == "ebic":
            res = select_ebic(x, path, cfg)
        else:
            res = mdl_selection(path, CoderKind.parse(m), cache)
        f1[m] = f1_score(res.graph, gt.graph).f1
        edges[m] = res.graph.n_edges
        lam[m] = res.best_lambda
    return TrialResult(kind.value, p, n, trial, f1, edges, lam, unconverged)


def _run_trial_args(args):
    return run_trial(*args)


@dataclass
class BenchmarkRow:
    kind: str
    p: int
    n: int
    method: str
    mean_f1: float
    trials: int
    seed: int
    failed: int = 0


def run_benchmark(kinds, sizes, methods=METHODS, trials: int = 10, seed: int = 0,
                  jobs: int = 1, grid_size: int = 50, progress=None):
    """Cross product of structures, ``(p, N)`` sizes and methods.

    Returns ``(rows, trial_results)``. Trials are independent work items
    keyed by ``(seed, kind, p, N, trial)``; results are aggregated in that
    fixed order, so output does not depend on ``jobs``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    methods = tuple(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    work = [(StructureKind.parse(k).value, int(p), int(n), t, seed, methods, grid_size)
            for k in kinds for p, n in sizes for t in range(trials)]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = []
            for i, r in enumerate(pool.map(_run_trial_args, work)):
                results.append(r)
                if progress:
                    progress(i + 1, len(work), r)
    else:
        results = []
        for i, w in enumerate(work):
            r = _run_trial_args(w)
            results.append(r)
            if progress:
                progress(i + 1, len(work), r)

    rows = []
    for k in kinds:
        k = StructureKind.parse(k).value
        for p, n in sizes:
            group = [r for r in results if (r.kind, r.p, r.n) == (k, p, n)]
            ok = [r for r in group if not r.failed]
            for m in methods:
                vals = [r.f1[m] for r in ok]
                mean = math.fsum(vals) / len(vals) if vals else float("nan")
                rows.append(BenchmarkRow(k, p, n, m, mean, len(ok), seed, len(group) - len(ok)))
    return rows, results

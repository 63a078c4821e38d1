"""Two-part description length of Gaussian data under a graph, and lambda selection.

The data part is a prequential code: sample ``i`` is coded with the
covariance completed (under the candidate graph) from samples ``0..i-1``.
The first few samples are coded under N(0, I), which is the same for
every candidate graph.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .completion import RIDGE_SCALE, complete_covariance
from .glasso import (
    GlassoConfig,
    NotConverged,
    PrecisionEstimate,
    extract_graph,
    glasso_path,
    lambda_grid,
    lambda_max,
)
from .graph import Graph
from .graph_codec import CoderKind, codelength
from .numerics import DimensionMismatch, SpdFactor, sample_covariance

__all__ = [
    "LN2",
    "gaussian_code_bits",
    "gaussian_code_bits_rows",
    "default_warmup",
    "default_update_every",
    "DataCode",
    "predictive_data_bits",
    "total_description_length",
    "LambdaPath",
    "fit_path",
    "DataBitsCache",
    "LambdaRecord",
    "SelectionResult",
    "select_model",
    "mdl_selection",
]

LN2 = math.log(2.0)
LOG_2PI = math.log(2.0 * math.pi)


def gaussian_code_bits(x, factor: SpdFactor) -> float:
    """Bits to code ``x`` under N(0, L L'), fixed-point resolution term dropped."""
    x = np.asarray(x, dtype=float)
    if x.shape != (factor.dim,):
        raise DimensionMismatch(f"vector of shape {x.shape} vs factor of dim {factor.dim}")
    return float(gaussian_code_bits_rows(x[None, :], factor)[0])


def gaussian_code_bits_rows(x: np.ndarray, factor: SpdFactor) -> np.ndarray:
    """Row-wise :func:`gaussian_code_bits` for an ``M x p`` array."""
    from scipy.linalg import solve_triangular

    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != factor.dim:
        raise DimensionMismatch(f"rows have length {x.shape[1]}, factor is {factor.dim}")
    z = solve_triangular(factor.lower, x.T, lower=True, check_finite=False)
    quad = np.einsum("ij,ij->j", z, z)
    logdet = 2.0 * np.sum(np.log(np.diag(factor.lower)))
    return (factor.dim * LOG_2PI + logdet + quad) / (2.0 * LN2)


def default_warmup(n: int) -> int:
    return min(10, math.ceil(n / 10))


def default_update_every(n: int) -> int:
    return max(1, math.ceil(n / 20))


@dataclass(frozen=True)
class DataCode:
    """Prequential code of a sample set. ``per_sample[i]`` is the cost of row ``i``."""

    bits: float
    per_sample: np.ndarray
    warmup: int
    update_every: int
    converged: bool
    ridge_applied: bool


def _prefix_covariance(scatter: np.ndarray, n: int) -> tuple[np.ndarray, bool]:
    """Prefix covariance, ridged up front if a variable has been all zeros so far."""
    s = scatter / n
    diag = np.diag(s)
    if diag.min() > 0:
        return s, False
    mean_var = diag.mean()
    gamma = RIDGE_SCALE * mean_var if mean_var > 0 else 1.0
    return s + gamma * np.eye(len(s)), True


def predictive_data_bits(
    d,
    g: Graph,
    warmup: int | None = None,
    update_every: int | None = None,
    *,
    method: str = "newton",
) -> DataCode:
    """Prequential codelength of the rows of ``d`` under graph ``g``.

    Rows ``0..warmup-1`` are coded under N(0, I). Afterwards the covariance
    is re-completed from the preceding rows at rows ``warmup``,
    ``warmup + update_every``, ... and reused in between. Row ``i`` is never
    coded with a model that has seen row ``i`` or later. A prefix in which
    some variable is still identically zero is ridged before completion.
    """
    x = np.asarray(d, dtype=float)
    if x.ndim != 2:
        raise DimensionMismatch("data must be an N x p array")
    n, p = x.shape
    if g.p != p:
        raise DimensionMismatch(f"graph has p={g.p}, data has p={p}")
    warmup = default_warmup(n) if warmup is None else warmup
    update_every = default_update_every(n) if update_every is None else update_every
    if warmup < 1 or update_every < 1:
        raise ValueError("warmup and update_every must be >= 1")
    if n < warmup + 1:
        raise ValueError(f"need at least warmup + 1 = {warmup + 1} samples, got {n}")

    per = np.empty(n)
    per[:warmup] = 0.5 * (p * LOG_2PI + np.einsum("ij,ij->i", x[:warmup], x[:warmup])) / LN2
    converged = True
    ridged = False
    scatter = x[:warmup].T @ x[:warmup]
    warm = None
    for start in range(warmup, n, update_every):
        stop = min(start + update_every, n)
        s, pre_ridged = _prefix_covariance(scatter, start)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NotConverged)
            cc = complete_covariance(s, g, n_samples=None if pre_ridged else start,
                                     method=method, warm_start=warm)
        warm = cc.support_precision
        converged &= cc.converged
        ridged |= pre_ridged or cc.ridge_applied
        per[start:stop] = gaussian_code_bits_rows(x[start:stop], cc.factor)
        scatter = scatter + x[start:stop].T @ x[start:stop]
    return DataCode(math.fsum(per), per, warmup, update_every, converged, ridged)


def total_description_length(d, g: Graph, kind) -> tuple[float, float, float]:
    """``(graph_bits, data_bits, graph_bits + data_bits)``."""
    graph_bits = codelength(g, kind)
    data_bits = predictive_data_bits(d, g).bits
    return graph_bits, data_bits, graph_bits + data_bits


@dataclass
class LambdaPath:
    """Graphical lasso fits along one penalty grid, shared by every selector."""

    lambdas: np.ndarray
    estimates: list[PrecisionEstimate]
    graphs: list[Graph]
    degenerate: bool = False


def fit_path(
    x,
    grid_size: int = 50,
    cfg: GlassoConfig = GlassoConfig(),
    lambdas=None,
) -> LambdaPath:
    """Fit the graphical lasso on ``x`` over the default (or given) grid.

    With ``grid_size == 1`` and no explicit grid, the single point is
    ``lambda_max``.
    """
    x = np.asarray(x, dtype=float)
    s = sample_covariance(x)
    degenerate = lambda_max(s) == 0.0
    if lambdas is None:
        if grid_size == 1:
            lambdas = np.array([lambda_max(s)])
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                lambdas = lambda_grid(s, grid_size)
    lambdas = np.asarray(lambdas, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotConverged)
        ests = glasso_path(s, lambdas, cfg)
    graphs = [extract_graph(e, cfg.zero_threshold) for e in ests]
    return LambdaPath(lambdas, ests, graphs, degenerate)


@dataclass(frozen=True)
class LambdaRecord:
    lam: float
    graph: Graph
    score: float
    graph_bits: float | None = None
    data_bits: float | None = None
    converged: bool = True
    completion_converged: bool = True

    @property
    def total_bits(self) -> float:
        return self.score

    def to_dict(self) -> dict:
        d = {"lambda": self.lam, "edges": [list(e) for e in self.graph.sorted_edges()]}
        if self.graph_bits is not None:
            d.update(graph_bits=self.graph_bits, data_bits=self.data_bits, total_bits=self.score)
        else:
            d["score"] = self.score
        d["converged"] = self.converged and self.completion_converged
        return d


@dataclass
class SelectionResult:
    """Per-lambda table plus the minimizer. Ties go to the larger lambda."""

    method: str
    records: list[LambdaRecord]
    best_index: int = field(init=False)
    ridge_applied: bool = False
    degenerate: bool = False

    def __post_init__(self):
        if not self.records:
            raise ValueError("empty selection table")
        self.best_index = min(range(len(self.records)),
                              key=lambda k: (self.records[k].score, -self.records[k].lam))

    @property
    def best(self) -> LambdaRecord:
        return self.records[self.best_index]

    @property
    def graph(self) -> Graph:
        return self.best.graph

    @property
    def best_lambda(self) -> float:
        return self.best.lam

    def to_dict(self) -> dict:
        return {
            "coder": self.method,
            "records": [r.to_dict() for r in self.records],
            "best_lambda": self.best.lam,
            "best_edges": [list(e) for e in self.best.graph.sorted_edges()],
            "best_total_bits": self.best.score,
            "ridge_applied": self.ridge_applied,
            "degenerate_grid": self.degenerate,
        }


class DataBitsCache:
    """Memoizes prequential codes per graph; distinct lambdas often share a graph."""

    def __init__(self, x):
        self.x = np.asarray(x, dtype=float)
        self._store: dict[frozenset, DataCode] = {}

    def __call__(self, g: Graph) -> DataCode:
        code = self._store.get(g.edges)
        if code is None:
            code = predictive_data_bits(self.x, g)
            self._store[g.edges] = code
        return code


def mdl_selection(path: LambdaPath, kind, data_bits: DataBitsCache,
                  extra_bits=None) -> SelectionResult:
    """Run the per-lambda loop on a fitted path.

    ``extra_bits(graph)`` adds a per-graph term (used for the parameter
    overhead of the atypical coder).
    """
    kind = CoderKind.parse(kind)
    records = []
    ridged = False
    graph_cache: dict[frozenset, float] = {}
    for lam, est, g in zip(path.lambdas, path.estimates, path.graphs):
        gb = graph_cache.get(g.edges)
        if gb is None:
            gb = codelength(g, kind)
            if extra_bits is not None:
                gb += extra_bits(g)
            graph_cache[g.edges] = gb
        code = data_bits(g)
        ridged |= code.ridge_applied
        records.append(LambdaRecord(float(lam), g, gb + code.bits, gb, code.bits,
                                    est.converged, code.converged))
    return SelectionResult(kind.value, records, ridge_applied=ridged, degenerate=path.degenerate)


def select_model(
    d,
    grid_size: int = 50,
    kind=CoderKind.DEGREE,
    cfg: GlassoConfig = GlassoConfig(),
    lambdas=None,
) -> SelectionResult:
    """Pick the penalty whose graph minimizes graph bits plus prequential data bits.

    Parameters
    ----------
    d : array_like, shape (N, p)
    grid_size : int
        Number of log-spaced penalties in ``[lambda_max/10, lambda_max]``.
    kind : CoderKind or str
        Graph coder used for the model part.
    cfg : GlassoConfig
        Solver settings; ``cfg.lam`` is ignored.
    lambdas : sequence of float, optional
        Explicit grid, overriding ``grid_size``.
    """
    x = np.asarray(d, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 2:
        raise ValueError("need an N x p array with N >= 2 and p >= 2")
    path = fit_path(x, grid_size, cfg, lambdas)
    return mdl_selection(path, kind, DataBitsCache(x))

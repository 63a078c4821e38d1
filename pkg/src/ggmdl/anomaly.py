"""Atypicality scoring of data batches against a trained Gaussian graphical model.

A batch is scored by the difference between two codelengths:

* typical: the graph ``G_T`` under the frozen coder learned on training
  data, plus the batch coded sample by sample under the fixed completed
  covariance of ``G_T``;
* atypical: the best two-part code found by running the lambda search on
  the batch itself, with the graph coder's parameters paid for through
  ``parameter_overhead``.

``score = atypical - typical``; a negative score means the batch is better
described by a model of its own, i.e. it is anomalous.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .completion import CompletedCovariance, complete_covariance
from .glasso import GlassoConfig
from .graph import Graph
from .graph_codec import (
    CoderKind,
    IncompatibleDimension,
    TrainedCoder,
    codelength_with_trained,
    parameter_overhead,
    train_coder,
)
from .mdl_select import (
    DataBitsCache,
    SelectionResult,
    fit_path,
    gaussian_code_bits_rows,
    mdl_selection,
    select_model,
)
from .numerics import sample_covariance

__all__ = [
    "TypicalModel",
    "AtypicalityScore",
    "EmptyInput",
    "train_typical",
    "typical_codelength",
    "atypical_codelength",
    "atypicality",
    "roc_auc",
    "roc_curve",
]


class EmptyInput(ValueError):
    """A score list passed to the ROC computation was empty."""


@dataclass(frozen=True)
class TypicalModel:
    graph: Graph
    completed: CompletedCovariance
    coder: TrainedCoder
    kind: CoderKind
    best_lambda: float
    n_train: int

    @property
    def p(self) -> int:
        return self.graph.p

    @property
    def graph_bits(self) -> float:
        return codelength_with_trained(self.graph, self.coder)

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "edges": [list(e) for e in self.graph.sorted_edges()],
            "sigma": self.completed.sigma.tolist(),
            "coder": self.coder.to_dict(),
            "kind": self.kind.value,
            "best_lambda": self.best_lambda,
            "n_train": self.n_train,
            "ridge_applied": self.completed.ridge_applied,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TypicalModel":
        g = Graph.from_edges(int(d["p"]), d["edges"])
        sigma = np.asarray(d["sigma"], dtype=float)
        cc = CompletedCovariance(sigma, g, True, 0, bool(d.get("ridge_applied", False)))
        return cls(g, cc, TrainedCoder.from_dict(d["coder"]), CoderKind.parse(d["kind"]),
                   float(d["best_lambda"]), int(d["n_train"]))

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "TypicalModel":
        return cls.from_dict(json.loads(text))


def train_typical(train, kind=CoderKind.DEGREE, cfg: GlassoConfig = GlassoConfig(),
                  grid_size: int = 50) -> TypicalModel:
    """Select ``G_T`` on the training data and freeze everything needed to code with it."""
    x = np.asarray(train, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need an N x p training array with N >= 2")
    kind = CoderKind.parse(kind)
    sel = select_model(x, grid_size, kind, cfg)
    g = sel.graph
    cc = complete_covariance(sample_covariance(x), g, n_samples=x.shape[0])
    return TypicalModel(g, cc, train_coder(g, kind), kind, sel.best_lambda, x.shape[0])


def _check_dim(x: np.ndarray, p: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return x.reshape(0, p)
    if x.ndim != 2 or x.shape[1] != p:
        raise IncompatibleDimension(f"batch has shape {x.shape}, model expects p={p}")
    return x


def typical_codelength(test, m: TypicalModel) -> float:
    """Frozen-model codelength: trained-coder graph bits plus per-sample Gaussian bits."""
    x = _check_dim(test, m.p)
    data_bits = math.fsum(gaussian_code_bits_rows(x, m.completed.factor)) if len(x) else 0.0
    return m.graph_bits + data_bits


def atypical_codelength(test, kind=CoderKind.DEGREE, cfg: GlassoConfig = GlassoConfig(),
                        grid_size: int = 50) -> tuple[float, SelectionResult]:
    """Best two-part code of the batch on its own, including coder parameter overhead."""
    x = np.asarray(test, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need an M x p batch with M >= 2")
    kind = CoderKind.parse(kind)
    m = x.shape[0]
    path = fit_path(x, grid_size, cfg)
    table = mdl_selection(path, kind, DataBitsCache(x),
                          extra_bits=lambda g: parameter_overhead(train_coder(g, kind), m))
    return table.best.total_bits, table


@dataclass(frozen=True)
class AtypicalityScore:
    typical_bits: float
    atypical_bits: float
    score: float
    anomalous: bool
    table: SelectionResult

    def to_dict(self) -> dict:
        return {
            "typical_bits": self.typical_bits,
            "atypical_bits": self.atypical_bits,
            "score": self.score,
            "anomalous": self.anomalous,
        }


def atypicality(test, m: TypicalModel, cfg: GlassoConfig = GlassoConfig(),
                threshold: float = 0.0, grid_size: int = 50) -> AtypicalityScore:
    """Score a batch; it is flagged anomalous when ``score < threshold``."""
    x = _check_dim(test, m.p)
    typical = typical_codelength(x, m)
    atypical, table = atypical_codelength(x, m.kind, cfg, grid_size)
    score = atypical - typical
    return AtypicalityScore(typical, atypical, score, score < threshold, table)


def roc_auc(scores_pos, scores_neg) -> float:
    """Area under the ROC curve as the Mann-Whitney statistic.

    Higher scores are taken to indicate the positive class; ties count 1/2.
    """
    pos = np.asarray(scores_pos, dtype=float).ravel()
    neg = np.asarray(scores_neg, dtype=float).ravel()
    if pos.size == 0 or neg.size == 0:
        raise EmptyInput("both score lists must be nonempty")
    diff = pos[:, None] - neg[None, :]
    return float((np.sum(diff > 0) + 0.5 * np.sum(diff == 0)) / diff.size)


def roc_curve(scores_pos, scores_neg) -> tuple[np.ndarray, np.ndarray]:
    """``(fpr, tpr)`` staircase from the strictest threshold down, starting at (0, 0)."""
    pos = np.asarray(scores_pos, dtype=float).ravel()
    neg = np.asarray(scores_neg, dtype=float).ravel()
    if pos.size == 0 or neg.size == 0:
        raise EmptyInput("both score lists must be nonempty")
    thresholds = np.unique(np.concatenate([pos, neg]))[::-1]
    fpr = [0.0] + [float(np.mean(neg >= t)) for t in thresholds]
    tpr = [0.0] + [float(np.mean(pos >= t)) for t in thresholds]
    return np.array(fpr), np.array(tpr)

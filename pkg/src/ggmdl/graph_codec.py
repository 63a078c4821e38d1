"""Sequential codelengths for labeled undirected graphs.

Every coder walks the edge slots ``(i, j), i < j`` of the upper triangle in
row-major order and assigns each slot a probability that depends only on
slots already visited, so a decoder can mirror it. Codelengths are in bits.

Three statistics drive the coders:

* ``IID``: a single Krichevsky-Trofimov (add-1/2) estimate of the edge
  probability.
* ``DEGREE``: the degree sequence is sent first (KT over ``0..p-1``), then
  each slot is coded with probability ``r_i * r_j / (2R)`` where ``r`` is
  the remaining degree budget and ``R`` half its sum.
* ``TRIANGLE``: two KT estimates, selected by whether the two endpoints
  already share a neighbor.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .graph import Graph

__all__ = [
    "EPS",
    "CoderKind",
    "TrainedCoder",
    "IncompatibleDimension",
    "codelength",
    "codelength_iid",
    "codelength_degree",
    "codelength_triangle",
    "coding_events",
    "train_coder",
    "codelength_with_trained",
    "parameter_overhead",
]

EPS = 1e-6


class IncompatibleDimension(ValueError):
    """A trained coder was applied to a graph with a different vertex count."""


class CoderKind(str, enum.Enum):
    IID = "iid"
    DEGREE = "degree"
    TRIANGLE = "triangle"

    @classmethod
    def parse(cls, value) -> "CoderKind":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


def _clip(q: float) -> float:
    return min(max(q, EPS), 1.0 - EPS)


def _slots(p: int) -> Iterator[tuple[int, int]]:
    for i in range(p):
        for j in range(i + 1, p):
            yield i, j


def _bits(prob: float) -> float:
    return -math.log2(prob)


# Each event is (probabilities over the alphabet, observed symbol). Binary
# slots use (P(0), P(1)).

def _events_iid(g: Graph, q_frozen: float | None = None):
    ones = 0
    for t, (i, j) in enumerate(_slots(g.p)):
        q = q_frozen if q_frozen is not None else (ones + 0.5) / (t + 1.0)
        bit = int(g.has_edge(i, j))
        yield (1.0 - q, q), bit
        ones += bit


def _events_degree(g: Graph, histogram=None):
    p = g.p
    deg = g.degrees()
    counts = np.zeros(p)
    for t, d in enumerate(deg):
        if histogram is None:
            probs = tuple((counts + 0.5) / (t + 0.5 * p))
        else:
            probs = tuple(histogram)
        yield probs, int(d)
        counts[d] += 1
    budget = deg.astype(np.int64).tolist()
    remaining = sum(budget)
    for i, j in _slots(p):
        if remaining == 0:
            q = EPS
        else:
            q = _clip(budget[i] * budget[j] / remaining)
        bit = int(g.has_edge(i, j))
        yield (1.0 - q, q), bit
        if bit:
            budget[i] -= 1
            budget[j] -= 1
            remaining -= 2


def _triangle_contexts(g: Graph) -> Iterator[tuple[int, int]]:
    """Yield ``(context, bit)`` per slot; context 1 iff a common neighbor is already coded."""
    nbrs = [set() for _ in range(g.p)]
    for i, j in _slots(g.p):
        ctx = 0 if nbrs[i].isdisjoint(nbrs[j]) else 1
        bit = int(g.has_edge(i, j))
        yield ctx, bit
        if bit:
            nbrs[i].add(j)
            nbrs[j].add(i)


def _events_triangle(g: Graph, q_frozen=None):
    ones = [0, 0]
    seen = [0, 0]
    for ctx, bit in _triangle_contexts(g):
        if q_frozen is None:
            q = (ones[ctx] + 0.5) / (seen[ctx] + 1.0)
        else:
            q = q_frozen[ctx]
        yield (1.0 - q, q), bit
        ones[ctx] += bit
        seen[ctx] += 1


def coding_events(g: Graph, kind, trained: "TrainedCoder | None" = None):
    """Per-symbol ``(probabilities, symbol)`` pairs produced by a coding pass.

    Exposed for validity checks; :func:`codelength` is the sum of
    ``-log2(probabilities[symbol])`` over these events.
    """
    kind = CoderKind.parse(kind)
    if g.p < 2:
        raise ValueError("graph coders need p >= 2")
    if trained is not None:
        if trained.kind is not kind:
            raise ValueError(f"coder kind {trained.kind.value} does not match {kind.value}")
        if trained.p != g.p:
            raise IncompatibleDimension(f"coder trained for p={trained.p}, graph has p={g.p}")
    if kind is CoderKind.IID:
        return _events_iid(g, None if trained is None else trained.params[0])
    if kind is CoderKind.DEGREE:
        return _events_degree(g, None if trained is None else trained.params)
    return _events_triangle(g, None if trained is None else trained.params)


def _sum_bits(events) -> float:
    return math.fsum(_bits(probs[sym]) for probs, sym in events)


def codelength(g: Graph, kind) -> float:
    """Adaptive codelength of ``g`` in bits under the given coder."""
    return _sum_bits(coding_events(g, kind))


def codelength_iid(g: Graph) -> float:
    return codelength(g, CoderKind.IID)


def codelength_degree(g: Graph) -> float:
    return codelength(g, CoderKind.DEGREE)


def codelength_triangle(g: Graph) -> float:
    return codelength(g, CoderKind.TRIANGLE)


@dataclass(frozen=True)
class TrainedCoder:
    """Coder with frozen parameters learned from one graph.

    ``params`` is ``(q,)`` for IID, the degree histogram over ``0..p-1`` for
    DEGREE, and ``(q_no_common, q_common)`` for TRIANGLE.
    """

    kind: CoderKind
    p: int
    params: tuple

    @property
    def n_free_params(self) -> int:
        if self.kind is CoderKind.IID:
            return 1
        if self.kind is CoderKind.DEGREE:
            return self.p - 1
        return 2

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "p": self.p, "params": list(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedCoder":
        return cls(CoderKind.parse(d["kind"]), int(d["p"]), tuple(float(v) for v in d["params"]))


def train_coder(g: Graph, kind) -> TrainedCoder:
    """Freeze the empirical statistics of ``g`` into a coder.

    Contexts of the triangle coder that never occur in ``g`` get 1/2.
    """
    kind = CoderKind.parse(kind)
    if g.p < 2:
        raise ValueError("graph coders need p >= 2")
    if kind is CoderKind.IID:
        return TrainedCoder(kind, g.p, (_clip(g.n_edges / g.n_slots),))
    if kind is CoderKind.DEGREE:
        counts = np.bincount(g.degrees(), minlength=g.p).astype(float)
        hist = np.clip((counts + 0.5) / (g.p + 0.5 * g.p), EPS, 1.0 - EPS)
        hist /= hist.sum()
        return TrainedCoder(kind, g.p, tuple(hist.tolist()))
    ones = [0, 0]
    seen = [0, 0]
    for ctx, bit in _triangle_contexts(g):
        ones[ctx] += bit
        seen[ctx] += 1
    q = tuple(_clip(ones[c] / seen[c]) if seen[c] else 0.5 for c in (0, 1))
    return TrainedCoder(kind, g.p, q)


def codelength_with_trained(g: Graph, coder: TrainedCoder) -> float:
    """Codelength of ``g`` under ``coder`` with its parameters held fixed."""
    return _sum_bits(coding_events(g, coder.kind, coder))


def parameter_overhead(coder: TrainedCoder, m_samples: int) -> float:
    """``(k/2) * log2(m_samples)`` bits for the coder's ``k`` free parameters."""
    if m_samples < 1:
        raise ValueError("m_samples must be >= 1")
    return 0.5 * coder.n_free_params * math.log2(m_samples)

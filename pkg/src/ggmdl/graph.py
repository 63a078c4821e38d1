"""Labeled undirected graphs on ``p`` vertices and their edge-list text format."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

__all__ = ["Graph", "read_edgelist", "write_edgelist", "format_edgelist", "parse_edgelist"]


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph. Edges are stored as sorted ``(i, j)`` with ``i < j``."""

    p: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.p < 0:
            raise ValueError("vertex count must be nonnegative")
        norm = set()
        for e in self.edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            if not (0 <= i < self.p and 0 <= j < self.p):
                raise ValueError(f"edge ({i}, {j}) out of range for p={self.p}")
            norm.add((i, j) if i < j else (j, i))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_edges(cls, p: int, edges: Iterable) -> "Graph":
        return cls(p, frozenset(tuple(e) for e in edges))

    @classmethod
    def empty(cls, p: int) -> "Graph":
        return cls(p)

    @classmethod
    def complete(cls, p: int) -> "Graph":
        return cls(p, frozenset((i, j) for i in range(p) for j in range(i + 1, p)))

    @classmethod
    def path(cls, p: int) -> "Graph":
        return cls(p, frozenset((i, i + 1) for i in range(p - 1)))

    @classmethod
    def from_adjacency(cls, a) -> "Graph":
        a = np.asarray(a)
        iu, ju = np.nonzero(np.triu(a != 0, k=1))
        return cls(a.shape[0], frozenset(zip(iu.tolist(), ju.tolist())))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_slots(self) -> int:
        return self.p * (self.p - 1) // 2

    def has_edge(self, i: int, j: int) -> bool:
        return ((i, j) if i < j else (j, i)) in self.edges

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.p, dtype=np.int64)
        for i, j in self.edges:
            d[i] += 1
            d[j] += 1
        return d

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.p, self.p), dtype=bool)
        for i, j in self.edges:
            a[i, j] = a[j, i] = True
        return a

    def slot_bits(self) -> np.ndarray:
        """Edge indicators over the upper triangle in row-major order."""
        iu, ju = np.triu_indices(self.p, k=1)
        return self.adjacency()[iu, ju]

    def relabel(self, perm) -> "Graph":
        perm = list(perm)
        return Graph(self.p, frozenset((perm[i], perm[j]) for i, j in self.edges))


def format_edgelist(g: Graph) -> str:
    lines = [f"p {g.p}"]
    lines += [f"{i} {j}" for i, j in g.sorted_edges()]
    return "\n".join(lines) + "\n"


def parse_edgelist(text: str) -> Graph:
    p = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if p is None:
            if len(parts) != 2 or parts[0] != "p":
                raise ValueError(f"line {lineno}: expected header 'p <count>'")
            p = int(parts[1])
            continue
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'i j'")
        edges.append((int(parts[0]), int(parts[1])))
    if p is None:
        raise ValueError("missing 'p <count>' header")
    return Graph.from_edges(p, edges)


def write_edgelist(g: Graph, path) -> None:
    Path(path).write_text(format_edgelist(g))


def read_edgelist(path) -> Graph:
    return parse_edgelist(Path(path).read_text())

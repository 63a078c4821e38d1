"""Ground-truth precision matrices and zero-mean Gaussian samples.

Random streams come from numpy's PCG64 seeded through ``SeedSequence``.
A stream is identified by ``(seed, spawn_key)`` with
``spawn_key = (purpose, kind, p, n, trial)``, where ``purpose`` is 0 for the
precision structure and 1 for the samples. Two distinct keys never share a
stream, and a key always yields the same stream on every platform.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .glasso import extract_graph
from .graph import Graph
from .numerics import cholesky, symmetrize

__all__ = ["StructureKind", "GroundTruth", "make_structure", "sample_mvn", "rng_for"]

STRUCTURE_STREAM = 0
SAMPLE_STREAM = 1


class StructureKind(str, enum.Enum):
    CYCLE = "cycle"
    AR1 = "ar1"
    AR2 = "ar2"
    ER = "er"
    HUB = "hub"

    @classmethod
    def parse(cls, value) -> "StructureKind":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("(", "").replace(")", "").replace("-", "")
        return cls(key)

    @property
    def label(self) -> str:
        return {"cycle": "Cycle", "ar1": "AR(1)", "ar2": "AR(2)", "er": "ER", "hub": "Hub"}[self.value]

    @property
    def index(self) -> int:
        return list(StructureKind).index(self)


def rng_for(seed: int, *key: int) -> np.random.Generator:
    """Generator for stream ``key`` under root ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class GroundTruth:
    kind: StructureKind
    omega: np.ndarray
    graph: Graph
    seed: int

    @property
    def p(self) -> int:
        return self.omega.shape[0]


def _banded(p: int, bands) -> np.ndarray:
    omega = np.eye(p)
    for k, v in enumerate(bands, start=1):
        idx = np.arange(p - k)
        omega[idx, idx + k] = v
        omega[idx + k, idx] = v
    return omega


def _shift_to_pd(omega1: np.ndarray) -> np.ndarray:
    rho = abs(np.linalg.eigvalsh(omega1)[0])
    return omega1 + (rho + 0.05) * np.eye(omega1.shape[0])


def _erdos_renyi(p: int, rng: np.random.Generator) -> np.ndarray:
    iu, ju = np.triu_indices(p, k=1)
    while True:
        mask = rng.random(iu.size) < 2.0 / p
        vals = rng.uniform(0.4, 0.8, size=iu.size)
        if mask.any():
            break
    omega1 = np.zeros((p, p))
    omega1[iu[mask], ju[mask]] = vals[mask]
    omega1 = omega1 + omega1.T
    np.fill_diagonal(omega1, 0.0)
    return _shift_to_pd(omega1)


def _hub(p: int, rng: np.random.Generator) -> np.ndarray:
    a = (rng.random((p, p)) < 0.01).astype(float)
    hubs = rng.choice(p, size=2, replace=False)
    for h in hubs:
        a[h, :] = np.maximum(a[h, :], rng.random(p) < 0.7)
        a[:, h] = np.maximum(a[:, h], rng.random(p) < 0.7)
    np.fill_diagonal(a, 0.0)
    mag = rng.uniform(0.25, 0.75, size=(p, p))
    sign = np.where(rng.random((p, p)) < 0.5, -1.0, 1.0)
    a = a * mag * sign
    omega1 = 0.5 * (a + a.T)
    return _shift_to_pd(omega1)


def make_structure(kind, p: int, seed: int = 0, trial: int = 0) -> GroundTruth:
    """Build one of the five benchmark precision matrices.

    ``cycle``, ``ar1`` and ``ar2`` are deterministic; ``er`` and ``hub``
    draw from the structure stream of ``(seed, kind, p, trial)``.
    """
    kind = StructureKind.parse(kind)
    if p < 3:
        raise ValueError(f"{kind.label} structure needs p >= 3")
    if kind is StructureKind.CYCLE:
        omega = _banded(p, [0.5])
        omega[0, p - 1] = omega[p - 1, 0] = 0.4
    elif kind is StructureKind.AR1:
        omega = _banded(p, [0.5])
    elif kind is StructureKind.AR2:
        omega = _banded(p, [0.5, 0.25])
    else:
        rng = rng_for(seed, STRUCTURE_STREAM, kind.index, p, 0, trial)
        omega = _erdos_renyi(p, rng) if kind is StructureKind.ER else _hub(p, rng)
    omega = symmetrize(omega)
    cholesky(omega)
    return GroundTruth(kind, omega, extract_graph(omega, 0.0), seed)


def sample_mvn(gt, n: int, seed: int = 0, trial: int = 0, rng: np.random.Generator | None = None) -> np.ndarray:
    """Draw ``n`` rows from N(0, inv(Omega)) as ``x = inv(L') z`` with ``L L' = Omega``.

    ``gt`` may be a :class:`GroundTruth` or a bare precision matrix.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    omega = gt.omega if isinstance(gt, GroundTruth) else np.asarray(gt, dtype=float)
    p = omega.shape[0]
    if rng is None:
        kind_index = gt.kind.index if isinstance(gt, GroundTruth) else len(StructureKind)
        rng = rng_for(seed, SAMPLE_STREAM, kind_index, p, n, trial)
    lower = cholesky(omega).lower
    z = rng.standard_normal((p, n))
    return solve_triangular(lower.T, z, lower=False).T

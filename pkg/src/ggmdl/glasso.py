"""Graphical lasso by block coordinate descent over columns.

Maximizes ``log det(Omega) - tr(S Omega) - lam * sum_{i != j} |Omega_ij|``.
The diagonal is not penalized, so the companion covariance keeps
``W_ii = S_ii`` throughout and the box constraint on the dual is
``|W_ij - S_ij| <= lam``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numba
import numpy as np

from .graph import Graph
from .numerics import symmetrize

__all__ = [
    "GlassoConfig",
    "PrecisionEstimate",
    "NotConverged",
    "DegenerateGrid",
    "SingularInput",
    "glasso_fit",
    "glasso_path",
    "extract_graph",
    "lambda_max",
    "lambda_grid",
]

DEFAULT_ZERO_THRESHOLD = 1e-6


class NotConverged(UserWarning):
    """An iterative solver hit its iteration cap; the last iterate is returned."""


class DegenerateGrid(UserWarning):
    """The largest useful penalty is zero, so every grid point is zero."""


class SingularInput(ValueError):
    """The covariance has a non-positive diagonal entry."""


@dataclass(frozen=True)
class GlassoConfig:
    lam: float = 0.1
    max_outer_iters: int = 200
    outer_tol: float = 1e-4
    inner_tol: float = 1e-6
    max_inner_iters: int = 1000
    zero_threshold: float = DEFAULT_ZERO_THRESHOLD

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.outer_tol <= 0 or self.inner_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_outer_iters < 1 or self.max_inner_iters < 1:
            raise ValueError("iteration caps must be positive")

    def with_lambda(self, lam: float) -> "GlassoConfig":
        return GlassoConfig(lam, self.max_outer_iters, self.outer_tol, self.inner_tol,
                            self.max_inner_iters, self.zero_threshold)


@dataclass(frozen=True)
class PrecisionEstimate:
    omega: np.ndarray
    sigma: np.ndarray
    lam: float
    n_iter: int
    converged: bool


@numba.njit(cache=True)
def _lasso_column(W, S, beta, j, lam, inner_tol, max_inner):
    """Cyclic coordinate descent for one column, ``min 1/2 b'W11 b - b's12 + lam|b|_1``.

    ``beta`` holds the previous solution (warm start) and is updated in place.
    Returns ``W11 @ beta`` with the ``j``-th entry left at zero.
    """
    p = W.shape[0]
    g = np.zeros(p)
    for k in range(p):
        if k == j or beta[k] == 0.0:
            continue
        for l in range(p):
            if l != j:
                g[l] += W[l, k] * beta[k]
    for _ in range(max_inner):
        max_delta = 0.0
        for k in range(p):
            if k == j:
                continue
            old = beta[k]
            r = S[k, j] - (g[k] - W[k, k] * old)
            if r > lam:
                new = (r - lam) / W[k, k]
            elif r < -lam:
                new = (r + lam) / W[k, k]
            else:
                new = 0.0
            if new != old:
                delta = new - old
                beta[k] = new
                for l in range(p):
                    if l != j:
                        g[l] += W[l, k] * delta
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        if max_delta < inner_tol:
            break
    g[j] = 0.0
    return g


@numba.njit(cache=True)
def _glasso_bcd(S, W, B, lam, max_outer, outer_tol, inner_tol, max_inner):
    p = S.shape[0]
    scale = 0.0
    for i in range(p):
        for k in range(p):
            if i != k:
                scale += abs(S[i, k])
    scale /= p * (p - 1)
    if scale == 0.0:
        scale = 1.0
    n_iter = 0
    converged = False
    for it in range(max_outer):
        n_iter = it + 1
        change = 0.0
        for j in range(p):
            beta = B[:, j]
            w12 = _lasso_column(W, S, beta, j, lam, inner_tol, max_inner)
            for k in range(p):
                if k != j:
                    change += abs(w12[k] - W[k, j])
                    W[k, j] = w12[k]
                    W[j, k] = w12[k]
        if change / (p * (p - 1)) < outer_tol * scale:
            converged = True
            break
    omega = np.zeros((p, p))
    for j in range(p):
        acc = 0.0
        for k in range(p):
            if k != j:
                acc += W[k, j] * B[k, j]
        ojj = 1.0 / (W[j, j] - acc)
        omega[j, j] = ojj
        for k in range(p):
            if k != j:
                omega[k, j] = -B[k, j] * ojj
    return omega, n_iter, converged


def _check_cov(s) -> np.ndarray:
    s = symmetrize(s)
    if s.shape[0] < 2:
        raise ValueError("need at least two variables")
    if np.any(np.diag(s) <= 0):
        raise SingularInput("covariance diagonal must be strictly positive")
    return s


def _diagonal_solution(s: np.ndarray, lam: float) -> PrecisionEstimate:
    d = np.diag(s)
    return PrecisionEstimate(np.diag(1.0 / d), np.diag(d), lam, 0, True)


def _fit(s, cfg, W, B) -> PrecisionEstimate:
    if cfg.lam >= lambda_max(s):
        W[:] = np.diag(np.diag(s))
        B[:] = 0.0
        return _diagonal_solution(s, cfg.lam)
    omega, n_iter, converged = _glasso_bcd(
        s, W, B, float(cfg.lam), cfg.max_outer_iters, cfg.outer_tol,
        cfg.inner_tol, cfg.max_inner_iters,
    )
    if not converged:
        warnings.warn(f"graphical lasso did not converge at lam={cfg.lam:.6g} "
                      f"after {n_iter} sweeps", NotConverged, stacklevel=3)
    return PrecisionEstimate(0.5 * (omega + omega.T), W.copy(), cfg.lam, n_iter, converged)


def glasso_fit(s, cfg: GlassoConfig) -> PrecisionEstimate:
    """Fit the graphical lasso at penalty ``cfg.lam`` from a cold start at ``diag(S)``.

    Parameters
    ----------
    s : array_like, shape (p, p)
        Sample covariance. Symmetric with strictly positive diagonal.
    cfg : GlassoConfig

    Returns
    -------
    PrecisionEstimate
        ``omega`` is the sparse precision estimate, ``sigma`` the covariance
        iterate ``W``. ``converged`` is False if the sweep cap was hit, in
        which case a :class:`NotConverged` warning is also emitted.
    """
    s = _check_cov(s)
    p = s.shape[0]
    return _fit(s, cfg, np.diag(np.diag(s)).copy(), np.zeros((p, p)))


def glasso_path(s, lambdas, cfg: GlassoConfig = GlassoConfig()) -> list[PrecisionEstimate]:
    """Fit along ``lambdas`` in the given order, warm-starting each fit from the last.

    The result depends only on the order of ``lambdas``; callers pass the
    grid in descending order.
    """
    s = _check_cov(s)
    p = s.shape[0]
    W = np.diag(np.diag(s)).copy()
    B = np.zeros((p, p))
    return [_fit(s, cfg.with_lambda(float(lam)), W, B) for lam in lambdas]


def extract_graph(est, tau: float = DEFAULT_ZERO_THRESHOLD) -> Graph:
    """Conditional-independence graph: edge ``{i, j}`` iff ``|Omega_ij| > tau``."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    omega = est.omega if isinstance(est, PrecisionEstimate) else np.asarray(est, dtype=float)
    a = np.abs(omega) > tau
    a = a | a.T
    np.fill_diagonal(a, False)
    return Graph.from_adjacency(a)


def lambda_max(s) -> float:
    """Smallest penalty at which the graphical lasso solution is diagonal."""
    s = np.asarray(s, dtype=float)
    if s.shape[0] < 2:
        raise ValueError("need at least two variables")
    off = np.abs(s - np.diag(np.diag(s)))
    return float(off.max())


def lambda_grid(s, k: int) -> np.ndarray:
    """``k`` penalties log-spaced from ``lambda_max(s)`` down to a tenth of it."""
    if k < 2:
        raise ValueError("grid needs at least two points")
    top = lambda_max(s)
    if top == 0.0:
        warnings.warn("lambda_max is zero; grid is degenerate", DegenerateGrid, stacklevel=2)
        return np.zeros(k)
    grid = np.logspace(np.log10(top), np.log10(top / 10.0), k)
    grid[0], grid[-1] = top, top / 10.0
    return grid

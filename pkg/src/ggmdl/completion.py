"""Maximum-likelihood covariance completion under a graph constraint.

Given a sample covariance ``S`` and a graph ``G``, find the SPD matrix that
agrees with ``S`` on the diagonal and on the edges of ``G`` and whose inverse
vanishes on every non-edge. Two solvers are provided:

``"dempster"``
    Cyclic updates of the free (non-edge) entries. Each update zeroes one
    entry of the inverse exactly; the inverse is carried along with a
    rank-2 Woodbury update.
``"regression"``
    Column-wise constrained regressions (each column solves a small system
    restricted to the vertex's neighbours). Same fixed point, usually far
    fewer sweeps.
``"newton"``
    Damped Newton ascent on ``log det K - tr(S K)`` over precision matrices
    ``K`` supported on the diagonal and the edges. Quadratic convergence,
    and it accepts a warm start ``K``, which makes repeated completions of
    slowly changing ``S`` cheap.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numba
import numpy as np

from .glasso import NotConverged
from .graph import Graph
from .numerics import NotPositiveDefinite, SpdFactor, cholesky, symmetrize

__all__ = [
    "CompletedCovariance",
    "RidgeApplied",
    "complete_covariance",
    "ridge_if_singular",
    "constraint_violation",
    "COMPLETION_METHODS",
]

COMPLETION_METHODS = ("dempster", "regression", "newton")
RIDGE_SCALE = 1e-3
# Relative pivot size below which a covariance is treated as singular.
SINGULAR_PIVOT = 1e-10


class RidgeApplied(UserWarning):
    """Informational: a ridge was added to a singular covariance before completion."""


@dataclass(frozen=True)
class CompletedCovariance:
    sigma: np.ndarray
    graph: Graph
    converged: bool
    n_iter: int
    ridge_applied: bool = False
    max_violation: float = 0.0
    support_precision: np.ndarray | None = field(default=None, repr=False, compare=False)
    _factor: list = field(default_factory=list, repr=False, compare=False)

    @property
    def factor(self) -> SpdFactor:
        if not self._factor:
            self._factor.append(cholesky(self.sigma))
        return self._factor[0]

    @property
    def precision(self) -> np.ndarray:
        k = np.linalg.inv(self.sigma)
        return 0.5 * (k + k.T)


@numba.njit(cache=True)
def _regression_kernel(S, adj, W, tol, max_iter):
    p = S.shape[0]
    scale = 0.0
    for i in range(p):
        scale = max(scale, abs(S[i, i]))
    for it in range(max_iter):
        max_change = 0.0
        for j in range(p):
            nb = np.nonzero(adj[j])[0]
            m = nb.shape[0]
            if m == 0:
                for k in range(p):
                    if k != j:
                        max_change = max(max_change, abs(W[k, j]))
                        W[k, j] = 0.0
                        W[j, k] = 0.0
                continue
            A = np.empty((m, m))
            b = np.empty(m)
            for a in range(m):
                b[a] = S[nb[a], j]
                for c in range(m):
                    A[a, c] = W[nb[a], nb[c]]
            beta = np.linalg.solve(A, b)
            for k in range(p):
                if k == j:
                    continue
                if adj[j, k]:
                    w = S[k, j]
                else:
                    w = 0.0
                    for a in range(m):
                        w += W[k, nb[a]] * beta[a]
                max_change = max(max_change, abs(w - W[k, j]))
                W[k, j] = w
                W[j, k] = w
        if max_change <= tol * scale:
            return it + 1, True
    return max_iter, False


@numba.njit(cache=True)
def _dempster_kernel(adj, W, K, tol, max_iter):
    p = W.shape[0]
    for it in range(max_iter):
        worst = 0.0
        for i in range(p):
            for j in range(i + 1, p):
                if adj[i, j]:
                    continue
                kij = K[i, j]
                if abs(kij) > worst:
                    worst = abs(kij)
                if kij == 0.0:
                    continue
                det = K[i, i] * K[j, j] - kij * kij
                delta = kij / det
                W[i, j] += delta
                W[j, i] += delta
                # Woodbury for W + delta * (e_i e_j' + e_j e_i')
                off = kij + 1.0 / delta
                m00 = K[i, i]
                m11 = K[j, j]
                mdet = m00 * m11 - off * off
                inv00 = m11 / mdet
                inv11 = m00 / mdet
                inv01 = -off / mdet
                ci = K[:, i].copy()
                cj = K[:, j].copy()
                for a in range(p):
                    ta = ci[a] * inv00 + cj[a] * inv01
                    ua = ci[a] * inv01 + cj[a] * inv11
                    for b in range(p):
                        K[a, b] -= ta * ci[b] + ua * cj[b]
                K[i, j] = 0.0
                K[j, i] = 0.0
        if worst < tol:
            return it + 1, True
    return max_iter, False


def constraint_violation(sigma: np.ndarray, g: Graph) -> float:
    """Largest ``|inv(sigma)_ij|`` over non-edges ``i != j``."""
    k = np.linalg.inv(sigma)
    mask = ~g.adjacency()
    np.fill_diagonal(mask, False)
    if not mask.any():
        return 0.0
    return float(np.abs(k[mask]).max())


def ridge_if_singular(s: np.ndarray, n_samples: int | None = None) -> tuple[np.ndarray, bool]:
    """Return ``S + gamma*I`` with ``gamma = 1e-3 * tr(S)/p`` if ``S`` is singular.

    ``S`` counts as singular when it was estimated from fewer than ``p``
    samples or its Cholesky factorization fails or has a negligible pivot.
    """
    p = s.shape[0]
    singular = n_samples is not None and n_samples < p
    if not singular:
        try:
            piv = np.diag(cholesky(s).lower) ** 2
            singular = piv.min() <= SINGULAR_PIVOT * np.diag(s).max()
        except NotPositiveDefinite:
            singular = True
    if not singular:
        return s, False
    gamma = RIDGE_SCALE * np.trace(s) / p
    return s + gamma * np.eye(p), True


def _support(g: Graph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    p = g.p
    e = np.array(g.sorted_edges(), dtype=np.int64).reshape(-1, 2)
    a = np.concatenate([np.arange(p), e[:, 0]])
    b = np.concatenate([np.arange(p), e[:, 1]])
    r = np.where(a == b, 0.5, 1.0)
    return a, b, r


def _newton(s, g, k0, tol, max_iter):
    """Maximize ``log det K - tr(S K)`` over ``K`` supported on diag + edges.

    With ``K = sum_k theta_k E_k``, ``E_k = e_a e_b' + e_b e_a'`` (``e_a e_a'`` on
    the diagonal), the gradient is ``2 r_k (W - S)_ab`` and the negated
    Hessian ``2 r_k r_l (W_ad W_bc + W_ac W_bd)`` with ``W = inv(K)``.
    """
    from scipy.linalg import cho_factor, cho_solve

    p = s.shape[0]
    a, b, r = _support(g)
    scale = np.abs(np.diag(s)).max()
    k = k0.copy()
    chol = cho_factor(k, lower=True, check_finite=False)

    def objective(chol_k, kk):
        return 2.0 * np.log(np.diag(chol_k[0])).sum() - np.sum(s * kk)

    f = objective(chol, k)
    eye = np.eye(p)
    rr = 2.0 * np.outer(r, r)
    for it in range(max_iter):
        w = cho_solve(chol, eye, check_finite=False)
        w = 0.5 * (w + w.T)
        resid = (w - s)[a, b]
        if np.abs(resid).max() <= tol * scale:
            return w, k, it, True
        grad = 2.0 * r * resid
        wa = w[a]
        wb = w[b]
        hess = rr * (wa[:, b] * wb[:, a] + wa[:, a] * wb[:, b])
        step = cho_solve(cho_factor(hess, lower=True, check_finite=False), grad,
                         check_finite=False)
        dk = np.zeros((p, p))
        dk[a, b] = step
        dk[b, a] = step
        decrement = float(grad @ step)
        # Slack absorbs rounding in f once the quadratic phase is reached.
        slack = 1e-12 * (abs(f) + 1.0)
        t = 1.0
        while t > 1e-10:
            cand = k + t * dk
            try:
                cchol = cho_factor(cand, lower=True, check_finite=False)
            except np.linalg.LinAlgError:
                t *= 0.5
                continue
            if np.any(np.diag(cchol[0]) <= 0):
                t *= 0.5
                continue
            fc = objective(cchol, cand)
            if fc >= f + 1e-4 * t * decrement - slack:
                break
            t *= 0.5
        else:
            return w, k, it + 1, False
        k, chol, f = cand, cchol, fc
    w = cho_solve(chol, eye, check_finite=False)
    return 0.5 * (w + w.T), k, max_iter, False


def complete_covariance(
    s,
    g: Graph,
    tol: float = 1e-6,
    max_iters: int = 500,
    *,
    n_samples: int | None = None,
    method: str = "newton",
    warm_start: np.ndarray | None = None,
) -> CompletedCovariance:
    """Complete ``S`` under the zero pattern of ``g``.

    Parameters
    ----------
    s : array_like, shape (p, p)
        Sample covariance with positive diagonal.
    g : Graph
    tol : float
        Convergence threshold on the largest non-edge entry of the inverse.
    max_iters : int
        Iteration cap. On overrun the last iterate is returned with
        ``converged=False`` and a :class:`NotConverged` warning.
    n_samples : int, optional
        Number of samples behind ``S``; fewer than ``p`` forces the ridge.
    method : {"newton", "regression", "dempster"}
    warm_start : ndarray, optional
        Precision matrix supported on ``g`` to start Newton from (for
        example the previous completion of a nearby ``S``). Ignored by the
        other methods.
    """
    s = symmetrize(s)
    p = s.shape[0]
    if g.p != p:
        raise ValueError(f"graph has p={g.p}, covariance is {p}x{p}")
    if np.any(np.diag(s) <= 0):
        raise ValueError("covariance diagonal must be strictly positive")
    if method not in COMPLETION_METHODS:
        raise ValueError(f"unknown completion method {method!r}")
    s, ridged = ridge_if_singular(s, n_samples)
    if g.n_edges == g.n_slots:
        return CompletedCovariance(s.copy(), g, True, 0, ridged, 0.0)
    if g.n_edges == 0:
        return CompletedCovariance(np.diag(np.diag(s)), g, True, 0, ridged, 0.0)

    precision = None
    if method == "newton":
        k0 = np.diag(1.0 / np.diag(s)) if warm_start is None else np.asarray(warm_start, float)
        W, precision, n_iter, _ = _newton(s, g, k0, 1e-11, max_iters)
    elif method == "regression":
        W = s.copy()
        # Sweep until the iterate stops moving, then judge the constraint.
        n_iter, _ = _regression_kernel(s, g.adjacency(), W, 1e-12, max_iters)
    else:
        W = s.copy()
        K = np.linalg.inv(W)
        n_iter, _ = _dempster_kernel(g.adjacency(), W, 0.5 * (K + K.T), 0.1 * tol, max_iters)
    W = 0.5 * (W + W.T)
    violation = constraint_violation(W, g)
    converged = violation < tol
    if not converged:
        warnings.warn(f"covariance completion stopped with violation {violation:.3g} "
                      f"after {n_iter} iterations", NotConverged, stacklevel=2)
    return CompletedCovariance(W, g, converged, n_iter, ridged, violation, precision)

"""Independent reference solutions used to cross-check the production path.

``weighted_rank1`` solves the count-weighted rank-1 approximation of the
cell-mean matrix spectrally (no alternating iteration) whenever the cell
counts only depend on the group; otherwise it falls back to a dense
weighted refinement from many random starts. ``chi_sq_sf_even`` is the
closed-form chi-square tail for even degrees of freedom in extended
precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, localcontext

import numpy as np

from .errors import EmptyCell
from .model import CellMeans

N_RESTARTS = 32


@dataclass(frozen=True, eq=False)
class OracleFit:
    fitted_products: np.ndarray
    lack_of_fit: float
    method: str


def _top_eigvec(G: np.ndarray) -> np.ndarray:
    if G.shape == (2, 2):
        a, b, d = G[0, 0], G[0, 1], G[1, 1]
        lam = 0.5 * (a + d) + math.hypot(0.5 * (a - d), b)
        v1 = np.array([b, lam - a])
        v2 = np.array([lam - d, b])
        v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
        nv = np.linalg.norm(v)
        if nv == 0:
            # G is a multiple of the identity: any unit vector is optimal
            return np.array([1.0, 0.0])
        return v / nv
    if G.shape == (1, 1):
        return np.ones(1)
    _, vecs = np.linalg.eigh(G)
    return vecs[:, -1]


def _spectral(means: np.ndarray, w: np.ndarray) -> np.ndarray:
    root = np.sqrt(w)
    A = means * root[None, :]
    n, p = A.shape
    if n <= p:
        u = _top_eigvec(A @ A.T)
        best = np.outer(u, u @ A)
    else:
        v = _top_eigvec(A.T @ A)
        best = np.outer(A @ v, v)
    return best / root[None, :]


def _weighted_sse(means, counts, fitted) -> float:
    r = means - fitted
    return float(np.sum(counts * r * r))


def _restarts(means: np.ndarray, counts: np.ndarray, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n, p = means.shape
    W = counts.astype(float)
    best, best_obj = None, np.inf
    for _ in range(N_RESTARTS):
        a = rng.standard_normal(n)
        obj = np.inf
        for _ in range(20_000):
            b = (W * means).T @ a / (W.T @ (a * a))
            a = (W * means) @ b / (W @ (b * b))
            new = _weighted_sse(means, counts, np.outer(a, b))
            if obj - new <= 1e-15 * max(new, 1.0):
                obj = new
                break
            obj = new
        if obj < best_obj:
            best, best_obj = np.outer(a, b), obj
    return best


def weighted_rank1(cm: CellMeans, seed: int = 0) -> OracleFit:
    """Best rank-1 approximation of the cell means under count weights."""
    means, counts = np.asarray(cm.means, float), np.asarray(cm.counts)
    if (counts == 0).any():
        i, z = map(int, np.argwhere(counts == 0)[0])
        raise EmptyCell(i, z)
    if (counts == counts[0:1, :]).all():
        fitted = _spectral(means, counts[0].astype(float))
        method = "spectral"
    else:
        fitted = _restarts(means, counts, seed)
        method = "restarts"
    return OracleFit(fitted, _weighted_sse(means, counts, fitted), method)


def chi_sq_sf_even(x: float, df: int) -> float:
    """exp(-x/2) * sum_{k < df/2} (x/2)^k / k!, in 50-digit decimal arithmetic."""
    if df <= 0 or df % 2:
        raise ValueError("df must be a positive even integer")
    if x < 0:
        raise ValueError("x must be nonnegative")
    with localcontext() as ctx:
        ctx.prec = 50
        h = Decimal(x) / 2
        term = Decimal(1)
        total = Decimal(1)
        for k in range(1, df // 2):
            term = term * h / k
            total += term
        return float((-h).exp() * total)

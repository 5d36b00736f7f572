"""Restricted (rank-1 bilinear) and saturated mean models.

The restricted model sets E(X_i | Z = z) = alpha_i * beta_z and is fitted by
alternating closed-form updates, each the exact least-squares minimizer for
one factor given the other. All sums run over non-missing entries only.

The residual sum of squares is evaluated per cell as

    sum_k (x_ik - a_i b_z)^2 = within-cell SSE + count_iz * (mean_iz - a_i b_z)^2

which is exact and avoids a pass over the raw data at each iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AllMeansZero,
    DegenerateInitialization,
    NotConverged,
    ZeroDenominator,
)
from .model import CellMeans, CellStats, IndicatorDataset, cell_means, require_full_cells

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 500
ZERO_NORM = 1e-12


@dataclass(frozen=True, eq=False)
class RestrictedFit:
    alpha: np.ndarray
    beta: np.ndarray
    sigma2_restricted: float
    iterations: int
    mse_trace: tuple[float, ...]
    converged: bool
    lack_of_fit: float = 0.0
    half_step_trace: tuple[float, ...] = ()
    ref_group: str | None = None
    degenerate: bool = False

    @property
    def fitted_products(self) -> np.ndarray:
        return np.outer(self.alpha, self.beta)

    def summary(self) -> dict:
        return {
            "alpha": [float(a) for a in self.alpha],
            "beta": [float(b) for b in self.beta],
            "sigma2_restricted": float(self.sigma2_restricted),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "degenerate": bool(self.degenerate),
            "ref_group": self.ref_group,
            "mse_trace": [float(v) for v in self.mse_trace],
        }


@dataclass(frozen=True, eq=False)
class SaturatedFit:
    cell_means: CellMeans
    sigma2_full: float
    m_obs: int = field(default=0)


def _group_index(dataset: IndicatorDataset, label) -> int:
    try:
        return dataset.group_names.index(str(label))
    except ValueError:
        raise KeyError(f"unknown group label {label!r}") from None


def _reference_order(dataset: IndicatorDataset) -> list[int]:
    sizes = dataset.group_sizes
    return sorted(range(dataset.n_groups), key=lambda z: (-sizes[z], z))


def init_alpha(dataset: IndicatorDataset, ref_group=None) -> np.ndarray:
    """Starting alpha: indicator means within a reference group.

    With ``ref_group=None`` the largest group whose mean vector is not
    (numerically) zero is used, ties going to the lowest index.
    """
    means = dataset.stats.means
    if ref_group is not None:
        z = _group_index(dataset, ref_group)
        a = means[:, z]
        if not np.all(np.isfinite(a)) or np.linalg.norm(a) < ZERO_NORM:
            raise DegenerateInitialization(
                f"indicator means in group {ref_group!r} are all zero or missing"
            )
        return a.copy()
    for z in _reference_order(dataset):
        a = means[:, z]
        if np.all(np.isfinite(a)) and np.linalg.norm(a) >= ZERO_NORM:
            return a.copy()
    raise AllMeansZero("every group has an all-zero indicator mean vector")


def _default_ref(dataset: IndicatorDataset) -> str | None:
    means = dataset.stats.means
    for z in _reference_order(dataset):
        a = means[:, z]
        if np.all(np.isfinite(a)) and np.linalg.norm(a) >= ZERO_NORM:
            return dataset.group_names[z]
    return None


def _beta_step(alpha: np.ndarray, st: CellStats) -> np.ndarray:
    num = alpha @ st.sums
    den = (alpha * alpha) @ st.counts
    bad = np.nonzero(den <= 0)[0]
    if bad.size:
        raise ZeroDenominator("beta", int(bad[0]))
    return num / den


def _alpha_step(beta: np.ndarray, st: CellStats) -> np.ndarray:
    num = st.sums @ beta
    den = st.counts @ (beta * beta)
    bad = np.nonzero(den <= 0)[0]
    if bad.size:
        raise ZeroDenominator("alpha", int(bad[0]))
    return num / den


def _lack_of_fit(alpha: np.ndarray, beta: np.ndarray, st: CellStats) -> float:
    resid = st.means - np.outer(alpha, beta)
    return float(np.sum(st.counts * resid * resid))


def _mse(alpha, beta, st: CellStats) -> float:
    return (st.within_sse + _lack_of_fit(alpha, beta, st)) / st.m_obs


def update_beta(alpha, dataset: IndicatorDataset) -> np.ndarray:
    """beta_z = sum_i alpha_i S_iz / sum_i alpha_i^2 c_iz (S: cell sums, c: cell counts)."""
    return _beta_step(np.asarray(alpha, dtype=float), dataset.stats)


def update_alpha(beta, dataset: IndicatorDataset) -> np.ndarray:
    """alpha_i = sum_z beta_z S_iz / sum_z beta_z^2 c_iz."""
    return _alpha_step(np.asarray(beta, dtype=float), dataset.stats)


def normalize(alpha: np.ndarray, beta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rescale so that ||alpha|| = sqrt(n) and the largest |alpha_i| is positive."""
    norm = np.linalg.norm(alpha)
    if norm == 0:
        return alpha.copy(), beta.copy()
    s = math.sqrt(alpha.size) / norm
    if alpha[int(np.argmax(np.abs(alpha)))] < 0:
        s = -s
    return alpha * s, beta / s


def _initial_variance(dataset: IndicatorDataset) -> float:
    x = dataset.values[~dataset.missing]
    return float(np.var(x, ddof=1)) if x.size > 1 else 0.0


def _degenerate_fit(dataset: IndicatorDataset) -> RestrictedFit:
    st = dataset.stats
    n, p = dataset.n_indicators, dataset.n_groups
    return RestrictedFit(
        alpha=np.zeros(n),
        beta=np.zeros(p),
        sigma2_restricted=st.total_sq / st.m_obs,
        iterations=0,
        mse_trace=(),
        converged=True,
        lack_of_fit=st.total_sq - st.within_sse,
        degenerate=True,
    )


def fit_restricted(
    dataset: IndicatorDataset,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    ref_group=None,
    alpha0=None,
) -> RestrictedFit:
    """Fit E(X_i | Z = z) = alpha_i beta_z by alternating least squares.

    Iterates beta-update then alpha-update until the residual mean square
    changes by less than ``tol`` between sweeps (the first sweep is compared
    against the sample variance of all observations). Raises NotConverged,
    carrying the partial fit, when ``max_iter`` sweeps do not suffice.
    """
    require_full_cells(dataset)
    st = dataset.stats
    ref_name = None
    if alpha0 is not None:
        alpha = np.array(alpha0, dtype=float)
    else:
        try:
            alpha = init_alpha(dataset, ref_group)
            ref_name = str(ref_group) if ref_group is not None else _default_ref(dataset)
        except AllMeansZero:
            return _degenerate_fit(dataset)
        except DegenerateInitialization:
            try:
                alpha = init_alpha(dataset)
            except AllMeansZero:
                return _degenerate_fit(dataset)
            ref_name = _default_ref(dataset)

    prev = _initial_variance(dataset)
    trace: list[float] = []
    half: list[float] = []
    converged = False
    beta = np.zeros(dataset.n_groups)
    for _ in range(max_iter):
        beta = _beta_step(alpha, st)
        half.append(_mse(alpha, beta, st))
        alpha = _alpha_step(beta, st)
        mse = _mse(alpha, beta, st)
        half.append(mse)
        trace.append(mse)
        if abs(mse - prev) < tol:
            converged = True
            break
        prev = mse

    a, b = normalize(alpha, beta)
    lof = max(_lack_of_fit(alpha, beta, st), 0.0)
    fit = RestrictedFit(
        alpha=a,
        beta=b,
        sigma2_restricted=(st.within_sse + lof) / st.m_obs,
        iterations=len(trace),
        mse_trace=tuple(trace),
        converged=converged,
        lack_of_fit=lof,
        half_step_trace=tuple(half),
        ref_group=ref_name,
    )
    if not converged:
        raise NotConverged(fit, tol)
    return fit


def fit_saturated(dataset: IndicatorDataset) -> SaturatedFit:
    cm = cell_means(dataset)
    st = dataset.stats
    return SaturatedFit(cell_means=cm, sigma2_full=st.within_sse / st.m_obs, m_obs=st.m_obs)

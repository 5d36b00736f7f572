"""Likelihood-ratio test of the rank-1 mean restriction against cell means."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, EmptyCell, InsufficientGroups, StratumTooSmall, ZeroFullVariance
from .estimator import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    RestrictedFit,
    SaturatedFit,
    fit_restricted,
    fit_saturated,
)
from .model import IndicatorDataset, require_full_cells
from .special import gammainc_upper

# variances below this fraction of the data's mean square are treated as zero
ZERO_VARIANCE_REL = 1e-20


@dataclass(frozen=True)
class TestOptions:
    __test__ = False  # not a pytest class

    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    ref_group: str | None = None


@dataclass(frozen=True, eq=False)
class TestResult:
    statistic: float
    df: int
    p_value: float
    sigma2_restricted: float
    sigma2_full: float
    m_obs: int
    fit: RestrictedFit
    degenerate: bool = False
    exact_fit: bool = False
    indicator_names: tuple[str, ...] = ()
    group_names: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        fit = self.fit
        return {
            "statistic": float(self.statistic),
            "df": int(self.df),
            "p_value": float(self.p_value),
            "sigma2_restricted": float(self.sigma2_restricted),
            "sigma2_full": float(self.sigma2_full),
            "m_obs": int(self.m_obs),
            "alpha": [float(a) for a in fit.alpha],
            "beta": [float(b) for b in fit.beta],
            "converged": bool(fit.converged),
            "iterations": int(fit.iterations),
            "ref_group": fit.ref_group,
            "degenerate": bool(self.degenerate),
            "exact_fit": bool(self.exact_fit),
            "indicator_names": list(self.indicator_names),
            "group_names": list(self.group_names),
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True, eq=False)
class StratifiedResult:
    per_stratum: list[tuple[str, TestResult]]
    combined_statistic: float
    combined_df: int
    combined_p: float
    bonferroni_p: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "combined_statistic": float(self.combined_statistic),
            "combined_df": int(self.combined_df),
            "combined_p": float(self.combined_p),
            "strata": [
                {"stratum": label, "bonferroni_p": float(bp), **res.to_dict()}
                for (label, res), bp in zip(self.per_stratum, self.bonferroni_p)
            ],
        }


def degrees_of_freedom(n: int, p: int) -> int:
    """np - (n + p - 1): saturated minus restricted parameter count."""
    if n < 1 or p < 1:
        raise ValueError("n and p must be positive")
    return (n - 1) * (p - 1)


def chi_sq_sf(x: float, df: int) -> float:
    """Upper tail P(chi2_df > x) = Q(df/2, x/2)."""
    if x < 0:
        raise ValueError("x must be nonnegative")
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(x):
        return 0.0
    return gammainc_upper(df / 2.0, x / 2.0)


def _data_mean_square(saturated: SaturatedFit) -> float:
    cm = saturated.cell_means
    m = saturated.m_obs or int(cm.counts.sum())
    return saturated.sigma2_full + float(np.sum(cm.counts * cm.means**2)) / m


def _is_zero(s2: float, scale: float) -> bool:
    return s2 <= ZERO_VARIANCE_REL * scale


def lrt_statistic(restricted: RestrictedFit, saturated: SaturatedFit, m_obs: int) -> float:
    """2 M (log sigma_r - log sigma_f), M the number of non-missing values.

    Noiseless data (zero within-cell variance) return 0 when the restricted
    fit is also exact and raise ZeroFullVariance otherwise.
    """
    s2r, s2f = restricted.sigma2_restricted, saturated.sigma2_full
    scale = _data_mean_square(saturated)
    if _is_zero(s2f, scale):
        if _is_zero(s2r, scale):
            return 0.0
        raise ZeroFullVariance(
            "within-cell variance is zero but the rank-1 fit is not exact; "
            "the likelihood ratio is unbounded"
        )
    return max(0.0, m_obs * math.log(s2r / s2f))


def run_test(dataset: IndicatorDataset, options: TestOptions | None = None) -> TestResult:
    opts = options or TestOptions()
    if dataset.n_groups < 2:
        raise InsufficientGroups(f"need at least 2 groups, got {dataset.n_groups}")
    if dataset.n_indicators < 2:
        raise DataError(f"need at least 2 indicators, got {dataset.n_indicators}")
    require_full_cells(dataset)
    restricted = fit_restricted(
        dataset, tol=opts.tol, max_iter=opts.max_iter, ref_group=opts.ref_group
    )
    saturated = fit_saturated(dataset)
    m_obs = dataset.m_obs
    stat = lrt_statistic(restricted, saturated, m_obs)
    df = degrees_of_freedom(dataset.n_indicators, dataset.n_groups)
    exact = _is_zero(saturated.sigma2_full, _data_mean_square(saturated))
    warnings = []
    if restricted.degenerate:
        warnings.append("all group means are zero; restricted fit is alpha = beta = 0")
    if exact:
        warnings.append("noiseless data: rank-1 fit is exact")
    return TestResult(
        statistic=stat,
        df=df,
        p_value=chi_sq_sf(stat, df),
        sigma2_restricted=restricted.sigma2_restricted,
        sigma2_full=saturated.sigma2_full,
        m_obs=m_obs,
        fit=restricted,
        degenerate=restricted.degenerate,
        exact_fit=exact,
        indicator_names=dataset.indicator_names,
        group_names=dataset.group_names,
        warnings=tuple(warnings),
    )


def run_stratified(
    dataset: IndicatorDataset, options: TestOptions | None = None
) -> StratifiedResult:
    """Test within each stratum and sum the independent chi-square statistics."""
    if dataset.strata is None:
        raise DataError("dataset has no strata")
    per: list[tuple[str, TestResult]] = []
    for s, label in enumerate(dataset.stratum_names):
        rows = dataset.strata == s
        if not rows.any():
            continue
        sub = dataset.subset(rows)
        try:
            per.append((label, run_test(sub, options)))
        except EmptyCell as exc:
            raise StratumTooSmall(label, str(exc)) from exc
    return combine_strata(per)


def combine_strata(per_stratum: list[tuple[str, TestResult]]) -> StratifiedResult:
    """Sum independent per-stratum statistics and dfs; Bonferroni-adjust each p."""
    stat = sum(r.statistic for _, r in per_stratum)
    df = sum(r.df for _, r in per_stratum)
    k = len(per_stratum)
    return StratifiedResult(
        per_stratum=list(per_stratum),
        combined_statistic=stat,
        combined_df=df,
        combined_p=chi_sq_sf(stat, df) if df > 0 else 1.0,
        bonferroni_p=[min(1.0, k * r.p_value) for _, r in per_stratum],
    )

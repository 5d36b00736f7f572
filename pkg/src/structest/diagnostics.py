"""Exploratory checks of the proportionality identity between indicators.

Under the structural model lambda_i E(X_j | z) = lambda_j E(X_i | z) for all
i, j, z, so group contrasts divided by the loadings agree across
indicators. Loadings are either supplied by the user or taken from the
restricted fit's alpha ("implied" diagnostics); they are never estimated by
factor analysis here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ZeroReference
from .estimator import ZERO_NORM, RestrictedFit
from .model import CellMeans


@dataclass(frozen=True, eq=False)
class ReliabilityVector:
    lam: np.ndarray
    implied: bool = False

    def __post_init__(self):
        lam = np.array(self.lam, dtype=float)
        if lam.ndim != 1 or lam.size == 0:
            raise DataError("loadings must be a nonempty vector")
        if (np.abs(lam) < ZERO_NORM).any():
            raise DataError("loadings must all be nonzero")
        object.__setattr__(self, "lam", lam)

    @classmethod
    def from_fit(cls, fit: RestrictedFit) -> ReliabilityVector:
        return cls(fit.alpha, implied=True)


def _group_pos(cm: CellMeans, z_ref) -> int:
    if z_ref is None:
        return 0
    if isinstance(z_ref, (int, np.integer)) and not cm.group_names:
        return int(z_ref)
    try:
        return list(cm.group_names).index(str(z_ref))
    except ValueError:
        raise DataError(f"unknown reference group {z_ref!r}") from None


def scaled_contrasts(cm: CellMeans, lam: ReliabilityVector, z_ref=None) -> np.ndarray:
    """(mean_iz - mean_i,ref) / lambda_i; columns are constant in i under the null."""
    means = np.asarray(cm.means, float)
    if lam.lam.size != means.shape[0]:
        raise DataError("need one loading per indicator")
    ref = _group_pos(cm, z_ref)
    return (means - means[:, [ref]]) / lam.lam[:, None]


def proportionality_residuals(cm: CellMeans, lam: ReliabilityVector) -> np.ndarray:
    """R[i, j, z] = lambda_i mean_jz - lambda_j mean_iz (antisymmetric in i, j)."""
    means = np.asarray(cm.means, float)
    L = lam.lam
    if L.size != means.shape[0]:
        raise DataError("need one loading per indicator")
    return L[:, None, None] * means[None, :, :] - L[None, :, None] * means[:, None, :]


theorem1_residuals = proportionality_residuals  # alias under the interface name


def implied_reliability_ratios(fit: RestrictedFit, ref_indicator: int = 0) -> np.ndarray:
    a = np.asarray(fit.alpha, float)
    if abs(a[ref_indicator]) < ZERO_NORM:
        raise ZeroReference(f"alpha[{ref_indicator}] is zero")
    return a / a[ref_indicator]


def diagnostic_tables(
    cm: CellMeans, lam: ReliabilityVector, fit: RestrictedFit | None = None, z_ref=None
) -> dict:
    """Plain-data bundle used by reports."""
    contrasts = scaled_contrasts(cm, lam, z_ref)
    out = {
        "implied": bool(lam.implied),
        "lambda": lam.lam.tolist(),
        "indicator_names": list(cm.indicator_names),
        "group_names": list(cm.group_names),
        "cell_means": np.asarray(cm.means, float).tolist(),
        "scaled_contrasts": contrasts.tolist(),
        "max_abs_proportionality_residual": float(np.max(np.abs(proportionality_residuals(cm, lam)))),
    }
    if fit is not None and not fit.degenerate:
        try:
            out["implied_ratios"] = implied_reliability_ratios(fit, 0).tolist()
        except ZeroReference:
            pass
    return out

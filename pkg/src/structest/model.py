"""Dataset and saturated-summary types shared by every other module.

Missing entries are stored as NaN and every sum or mean is taken over the
available cases only. Group and stratum labels are mapped to dense 0-based
indices in order of first appearance; the original labels are kept for
reporting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DataError, EmptyCell


def _dense_labels(labels) -> tuple[np.ndarray, tuple[str, ...]]:
    index: dict[str, int] = {}
    codes = np.empty(len(labels), dtype=np.intp)
    for k, lab in enumerate(labels):
        key = str(lab)
        codes[k] = index.setdefault(key, len(index))
    return codes, tuple(index)


@dataclass(frozen=True)
class CellStats:
    """Per-cell sufficient statistics (indicator x group)."""

    sums: np.ndarray
    counts: np.ndarray
    within_sse: float
    total_sq: float

    @property
    def m_obs(self) -> int:
        return int(self.counts.sum())

    @property
    def means(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.sums / self.counts


@dataclass(frozen=True, eq=False)
class IndicatorDataset:
    """N subjects by n indicators, with a discrete grouping variable.

    ``group`` holds dense indices into ``group_names``; ``strata`` (if any)
    holds dense indices into ``stratum_names``.
    """

    values: np.ndarray
    group: np.ndarray
    group_names: tuple[str, ...]
    indicator_names: tuple[str, ...] = ()
    strata: np.ndarray | None = None
    stratum_names: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError("values must be a 2-d array (subjects x indicators)")
        values.flags.writeable = False
        group = np.array(self.group, dtype=np.intp)
        group.flags.writeable = False
        N, n = values.shape
        if N < 1:
            raise DataError("dataset has no subjects")
        if n < 1:
            raise DataError("dataset has no indicators")
        if group.shape != (N,):
            raise DataError("group must have one label per subject")
        p = len(self.group_names)
        if p < 1 or group.min() < 0 or group.max() >= p:
            raise DataError("group indices out of range of group_names")
        if np.isinf(values).any():
            raise DataError("indicator values must be finite or missing")
        if not np.isfinite(values).any():
            raise DataError("dataset has no non-missing values")
        names = tuple(self.indicator_names) or tuple(f"x{i + 1}" for i in range(n))
        if len(names) != n:
            raise DataError("need one indicator name per column")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "group", group)
        object.__setattr__(self, "group_names", tuple(str(g) for g in self.group_names))
        object.__setattr__(self, "indicator_names", names)
        if self.strata is not None:
            strata = np.array(self.strata, dtype=np.intp)
            if strata.shape != (N,):
                raise DataError("strata must have one label per subject")
            if strata.min() < 0 or strata.max() >= len(self.stratum_names):
                raise DataError("stratum indices out of range of stratum_names")
            strata.flags.writeable = False
            object.__setattr__(self, "strata", strata)

    @classmethod
    def from_labels(
        cls,
        values,
        group_labels: Sequence,
        strata_labels: Sequence | None = None,
        indicator_names: Sequence[str] = (),
    ) -> IndicatorDataset:
        """Build a dataset from arbitrary group/stratum labels (first-appearance order)."""
        group, group_names = _dense_labels(group_labels)
        strata, stratum_names = None, ()
        if strata_labels is not None:
            strata, stratum_names = _dense_labels(strata_labels)
        return cls(
            values=values,
            group=group,
            group_names=group_names,
            indicator_names=tuple(indicator_names),
            strata=strata,
            stratum_names=stratum_names,
        )

    @property
    def n_subjects(self) -> int:
        return self.values.shape[0]

    @property
    def n_indicators(self) -> int:
        return self.values.shape[1]

    @property
    def n_groups(self) -> int:
        return len(self.group_names)

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    @property
    def m_obs(self) -> int:
        return int(np.count_nonzero(~self.missing))

    @property
    def group_sizes(self) -> np.ndarray:
        return np.bincount(self.group, minlength=self.n_groups)

    @cached_property
    def stats(self) -> CellStats:
        n, p = self.n_indicators, self.n_groups
        sums = np.zeros((n, p))
        counts = np.zeros((n, p), dtype=np.int64)
        within = 0.0
        total_sq = 0.0
        for i in range(n):
            x = self.values[:, i]
            ok = ~np.isnan(x)
            xi, gi = x[ok], self.group[ok]
            sums[i] = np.bincount(gi, weights=xi, minlength=p)
            counts[i] = np.bincount(gi, minlength=p)
            with np.errstate(invalid="ignore", divide="ignore"):
                mu = sums[i] / counts[i]
            if xi.size:
                within += float(np.sum((xi - mu[gi]) ** 2))
                total_sq += float(np.dot(xi, xi))
        sums.flags.writeable = False
        counts.flags.writeable = False
        return CellStats(sums=sums, counts=counts, within_sse=within, total_sq=total_sq)

    def subset(self, rows) -> IndicatorDataset:
        """Rows selected by a boolean mask or index array; keeps all group labels."""
        rows = np.asarray(rows)
        return IndicatorDataset(
            values=self.values[rows],
            group=self.group[rows],
            group_names=self.group_names,
            indicator_names=self.indicator_names,
        )

    def stacked(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Long layout: (x, item index, group index), item-major, missing dropped."""
        n = self.n_indicators
        x = self.values.T.ravel()
        item = np.repeat(np.arange(n), self.n_subjects)
        grp = np.tile(self.group, n)
        ok = ~np.isnan(x)
        return x[ok], item[ok], grp[ok]


@dataclass(frozen=True, eq=False)
class CellMeans:
    means: np.ndarray
    counts: np.ndarray
    group_sizes: np.ndarray
    indicator_names: tuple[str, ...] = ()
    group_names: tuple[str, ...] = ()


@dataclass(frozen=True)
class ValidationReport:
    n_subjects: int
    n_indicators: int
    n_groups: int
    m_obs: int
    n_missing: int
    counts: list[list[int]]
    group_sizes: list[int]
    empty_cells: list[tuple[str, str]] = field(default_factory=list)
    constant_indicators: list[str] = field(default_factory=list)
    empty_groups: list[str] = field(default_factory=list)

    @property
    def flagged(self) -> bool:
        return bool(self.empty_cells or self.constant_indicators or self.empty_groups)

    def to_dict(self) -> dict:
        return {
            "N": self.n_subjects,
            "n": self.n_indicators,
            "p": self.n_groups,
            "M": self.m_obs,
            "n_missing": self.n_missing,
            "counts": self.counts,
            "group_sizes": self.group_sizes,
            "empty_cells": [list(c) for c in self.empty_cells],
            "constant_indicators": self.constant_indicators,
            "empty_groups": self.empty_groups,
        }


def validate(dataset: IndicatorDataset) -> ValidationReport:
    st = dataset.stats
    counts = st.counts
    empty = [
        (dataset.indicator_names[i], dataset.group_names[z])
        for i, z in zip(*np.nonzero(counts == 0))
    ]
    constant = []
    for i, name in enumerate(dataset.indicator_names):
        x = dataset.values[:, i]
        x = x[~np.isnan(x)]
        if x.size == 0 or np.all(x == x[0]):
            constant.append(name)
    sizes = dataset.group_sizes
    return ValidationReport(
        n_subjects=dataset.n_subjects,
        n_indicators=dataset.n_indicators,
        n_groups=dataset.n_groups,
        m_obs=dataset.m_obs,
        n_missing=int(dataset.missing.sum()),
        counts=counts.tolist(),
        group_sizes=sizes.tolist(),
        empty_cells=empty,
        constant_indicators=constant,
        empty_groups=[dataset.group_names[z] for z in np.nonzero(sizes == 0)[0]],
    )


def require_full_cells(dataset: IndicatorDataset) -> None:
    counts = dataset.stats.counts
    if (counts == 0).any():
        i, z = map(int, np.argwhere(counts == 0)[0])
        raise EmptyCell(dataset.indicator_names[i], dataset.group_names[z])


def cell_means(dataset: IndicatorDataset) -> CellMeans:
    """Available-case mean of each indicator within each group.

    Raises EmptyCell if any (indicator, group) cell has no observations.
    """
    require_full_cells(dataset)
    st = dataset.stats
    return CellMeans(
        means=st.means,
        counts=st.counts,
        group_sizes=dataset.group_sizes,
        indicator_names=dataset.indicator_names,
        group_names=dataset.group_names,
    )

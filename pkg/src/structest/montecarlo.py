"""Monte Carlo estimates of rejection rates (size under nulls, power otherwise)."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import StructestError
from .lrt import TestOptions, run_test
from .simulate import ScenarioSpec, generate

Z_975 = 1.959963984540054


class ReplicateFailed(StructestError):
    def __init__(self, index: int, cause: Exception):
        self._init_args = (index, cause)
        self.index = index
        self.cause = cause
        super().__init__(f"replicate {index} failed: {type(cause).__name__}: {cause}")


@dataclass(frozen=True, eq=False)
class CalibrationResult:
    replicates: int
    rejections: int
    rate: float
    ci_low: float
    ci_high: float
    alpha_level: float
    spec: ScenarioSpec
    seed: int
    p_values: tuple[float, ...] = field(default=(), repr=False)

    def to_dict(self, include_p_values: bool = False) -> dict:
        d = {
            "replicates": self.replicates,
            "rejections": self.rejections,
            "rate": self.rate,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "alpha_level": self.alpha_level,
            "seed": self.seed,
            "spec": self.spec.to_dict(),
        }
        if include_p_values:
            d["p_values"] = list(self.p_values)
        return d


def replicate_seed(seed: int, index: int) -> int:
    """Seed of replicate ``index``; depends on nothing but (seed, index)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


def binomial_ci(k: int, n: int) -> tuple[float, float]:
    """95% normal-approximation interval with continuity correction."""
    r = k / n
    half = Z_975 * math.sqrt(r * (1 - r) / n) + 0.5 / n
    return max(0.0, r - half), min(1.0, r + half)


def _one(args) -> float:
    spec, seed, index, options = args
    try:
        return run_test(generate(spec, replicate_seed(seed, index)), options).p_value
    except Exception as exc:  # re-raised with the replicate index attached
        raise ReplicateFailed(index, exc) from exc


def replicate_p_values(
    spec: ScenarioSpec,
    replicates: int,
    seed: int,
    options: TestOptions | None = None,
    workers: int = 1,
) -> np.ndarray:
    jobs = [(spec, seed, k, options) for k in range(replicates)]
    if workers <= 1:
        return np.array([_one(j) for j in jobs])
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return np.array(list(ex.map(_one, jobs, chunksize=max(1, replicates // (4 * workers)))))


def rejection_rate(
    spec: ScenarioSpec,
    alpha_level: float = 0.05,
    replicates: int = 1000,
    seed: int = 0,
    options: TestOptions | None = None,
    workers: int = 1,
) -> CalibrationResult:
    """Share of replicates with p-value <= alpha_level."""
    if replicates < 100:
        raise ValueError("need at least 100 replicates")
    if not 0 < alpha_level <= 1:
        raise ValueError("alpha_level must lie in (0, 1]")
    pv = replicate_p_values(spec, replicates, seed, options, workers)
    k = int(np.count_nonzero(pv <= alpha_level))
    lo, hi = binomial_ci(k, replicates)
    return CalibrationResult(
        replicates=replicates,
        rejections=k,
        rate=k / replicates,
        ci_low=lo,
        ci_high=hi,
        alpha_level=alpha_level,
        spec=spec,
        seed=seed,
        p_values=tuple(float(v) for v in pv),
    )


def power_curve(
    spec_grid: list[ScenarioSpec],
    alpha_level: float = 0.05,
    replicates: int = 1000,
    seed: int = 0,
    options: TestOptions | None = None,
    workers: int = 1,
) -> list[CalibrationResult]:
    if not spec_grid:
        raise ValueError("spec_grid is empty")
    return [
        rejection_rate(spec, alpha_level, replicates, seed, options, workers)
        for spec in spec_grid
    ]

"""Likelihood-ratio test against the structural reading of a one-factor model.

Under the structural model every group mean of every indicator factors as
alpha_i * beta_z. The test compares that rank-1 mean model with free cell
means and refers the likelihood ratio to chi-square with (n-1)(p-1) df.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DataError,
    EmptyCell,
    NotConverged,
    NumericalError,
    StructestError,
    ZeroFullVariance,
)
from .model import CellMeans, IndicatorDataset, ValidationReport, cell_means, validate  # noqa: E402
from .estimator import RestrictedFit, SaturatedFit, fit_restricted, fit_saturated  # noqa: E402
from .lrt import (  # noqa: E402
    StratifiedResult,
    TestOptions,
    TestResult,
    chi_sq_sf,
    degrees_of_freedom,
    run_stratified,
    run_test,
)
from .simulate import ScenarioSpec, generate, population_cell_means  # noqa: E402
from .montecarlo import CalibrationResult, power_curve, rejection_rate  # noqa: E402

__all__ = [
    "CalibrationResult",
    "CellMeans",
    "DataError",
    "EmptyCell",
    "IndicatorDataset",
    "NotConverged",
    "NumericalError",
    "RestrictedFit",
    "SaturatedFit",
    "ScenarioSpec",
    "StratifiedResult",
    "StructestError",
    "TestOptions",
    "TestResult",
    "ValidationReport",
    "ZeroFullVariance",
    "cell_means",
    "chi_sq_sf",
    "degrees_of_freedom",
    "fit_restricted",
    "fit_saturated",
    "generate",
    "population_cell_means",
    "power_curve",
    "rejection_rate",
    "run_stratified",
    "run_test",
    "validate",
]

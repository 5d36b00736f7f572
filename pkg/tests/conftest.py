import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from structest.model import IndicatorDataset

settings.register_profile(
    "default", max_examples=60, deadline=None, derandomize=True, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def make_dataset(values, groups, names=None):
    """Dataset from a value matrix and a list of group labels."""
    return IndicatorDataset.from_labels(np.asarray(values, float), list(groups), None, names or ())


def cell_dataset(means, m=2, spread=0.0):
    """Complete data with ``m`` subjects per group and exactly the given cell means.

    With ``spread`` > 0 the subjects in each group sit at mean +/- spread, so
    the within-cell variance is spread**2 and the means are untouched.
    """
    means = np.asarray(means, float)
    n, p = means.shape
    rows, groups = [], []
    for z in range(p):
        for k in range(m):
            sign = 0.0 if m == 1 else (1.0 if k % 2 == 0 else -1.0)
            if m % 2 == 1 and k == m - 1:
                sign = 0.0
            rows.append(means[:, z] + sign * spread)
            groups.append(str(z + 1))
    return make_dataset(rows, groups)


def random_dataset(rng, n, p, per_group=(1, 8), missing=0.0, scale=3.0):
    """Random data with every (indicator, group) cell holding at least one value."""
    sizes = rng.integers(per_group[0], per_group[1] + 1, size=p)
    groups = np.repeat(np.arange(p), sizes)
    X = rng.normal(scale=scale, size=(groups.size, n)) + rng.normal(size=(1, n))
    if missing > 0:
        drop = rng.random(X.shape) < missing
        for z in range(p):
            first = np.nonzero(groups == z)[0][0]
            drop[first] = False
        X[drop] = np.nan
    return make_dataset(X, [str(g + 1) for g in groups])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from structest.errors import AllMeansZero, DegenerateInitialization, NotConverged
from structest.estimator import (
    fit_restricted,
    fit_saturated,
    init_alpha,
    update_alpha,
    update_beta,
)
from structest.model import IndicatorDataset, cell_means
from structest.oracle import weighted_rank1
from structest.simulate import ScenarioSpec, generate

from conftest import cell_dataset, make_dataset, random_dataset

nan = np.nan
SMALLEST_SV2 = (7 - math.sqrt(45)) / 2


def _fit(ds, **kw):
    kw.setdefault("max_iter", 50_000)
    return fit_restricted(ds, **kw)


# -- initialization ---------------------------------------------------------

def test_init_alpha_group_means():
    ds = make_dataset([[1, 2], [3, 2], [0, 0]], ["a", "a", "b"])
    np.testing.assert_array_equal(init_alpha(ds, "a"), [2.0, 2.0])


def test_init_alpha_copies_reference_means():
    ds = cell_dataset([[0.4, 1.0], [-0.1, 1.0], [0.7, 1.0]], m=1)
    np.testing.assert_allclose(init_alpha(ds, "1"), [0.4, -0.1, 0.7])


def test_init_alpha_all_zero():
    ds = make_dataset(np.zeros((4, 3)), ["1", "2", "1", "2"])
    with pytest.raises(AllMeansZero):
        init_alpha(ds)


def test_init_alpha_explicit_zero_group():
    ds = make_dataset([[0, 0], [0, 0], [1, 2]], ["a", "a", "b"])
    with pytest.raises(DegenerateInitialization):
        init_alpha(ds, "a")
    # default choice skips the degenerate group even though it is larger
    np.testing.assert_array_equal(init_alpha(ds), [1.0, 2.0])


def test_default_reference_is_largest_group():
    ds = make_dataset([[1, 1], [5, 5], [5, 5], [9, 9]], ["a", "b", "b", "c"])
    np.testing.assert_array_equal(init_alpha(ds), [5.0, 5.0])


# -- half-step updates ------------------------------------------------------

def test_update_beta_unit_alpha_is_pooled_mean():
    ds = make_dataset([[1, 2, 3], [4, 5, 6], [10, 20, 30]], ["1", "1", "2"])
    beta = update_beta(np.ones(3), ds)
    np.testing.assert_allclose(beta, [21 / 6, 20.0])


def test_update_beta_single_indicator():
    ds = make_dataset([[2.0], [4.0], [9.0]], ["1", "1", "2"])
    np.testing.assert_allclose(update_beta([0.5], ds), [3.0 / 0.5, 9.0 / 0.5])


def test_update_beta_hand_sum():
    # alpha = (1, 2), cell means (3, 6) in group 1 with equal counts
    ds = cell_dataset([[3, 1], [6, 1]], m=4, spread=0.7)
    assert update_beta([1.0, 2.0], ds)[0] == pytest.approx((1 * 3 + 2 * 6) / (1 + 4))


def test_update_alpha_unit_beta_is_overall_mean():
    ds = make_dataset([[1, 2], [nan, 4], [6, 9]], ["1", "2", "2"])
    np.testing.assert_allclose(update_alpha(np.ones(2), ds), [3.5, 5.0])


def test_update_alpha_single_group():
    ds = IndicatorDataset([[2.0, 1.0], [4.0, 5.0]], [0, 0], ("only",))
    np.testing.assert_allclose(update_alpha([4.0], ds), [3.0 / 4.0, 3.0 / 4.0])


def test_update_alpha_hand_sum():
    ds = make_dataset([[3.0, 1.0], [6.0, 1.0]], ["1", "2"])
    assert update_alpha([1.0, 2.0], ds)[0] == pytest.approx((3 + 12) / 5)


# -- restricted fit -----------------------------------------------------------

def test_rank1_means_reproduced_exactly():
    ds = cell_dataset([[1, 2], [2, 4]], m=3)
    fit = _fit(ds)
    assert fit.converged
    np.testing.assert_allclose(fit.fitted_products, [[1, 2], [2, 4]], atol=1e-10)
    assert fit.sigma2_restricted == pytest.approx(fit_saturated(ds).sigma2_full, abs=1e-20)


@pytest.mark.parametrize("m", [1, 4])
def test_two_by_two_gap_is_smallest_singular_value(m):
    ds = cell_dataset([[2, 1], [1, 1]], m=m)
    fit = _fit(ds, tol=1e-15)
    sat = fit_saturated(ds)
    assert sat.sigma2_full == 0.0
    assert fit.sigma2_restricted - sat.sigma2_full == pytest.approx(SMALLEST_SV2 / 4, rel=1e-9)


def test_well_conditioned_null_converges_quickly():
    spec = ScenarioSpec.default(5, 2, 2000, eta_shift=(0.0, 0.3), eta_mean=1.0)
    fit = fit_restricted(generate(spec, 42))
    assert fit.converged
    assert fit.iterations <= 10


def test_normalization():
    ds = cell_dataset([[-2, -4], [1, 2], [0.5, 1.5]], m=2, spread=0.3)
    fit = _fit(ds)
    assert np.linalg.norm(fit.alpha) == pytest.approx(math.sqrt(3))
    assert fit.alpha[int(np.argmax(np.abs(fit.alpha)))] > 0


def test_not_converged_carries_partial_fit():
    rng = np.random.default_rng(3)
    ds = random_dataset(rng, 4, 3, per_group=(5, 5))
    with pytest.raises(NotConverged) as info:
        fit_restricted(ds, tol=1e-300, max_iter=3)
    assert info.value.fit.iterations == 3
    assert not info.value.fit.converged


def test_all_means_zero_gives_degenerate_fit():
    X = np.array([[1.0, -1.0], [-1.0, 1.0], [2.0, 0.0], [-2.0, 0.0]])
    ds = make_dataset(X, ["1", "1", "2", "2"])
    fit = fit_restricted(ds)
    assert fit.degenerate
    assert np.all(fit.alpha == 0) and np.all(fit.beta == 0)
    assert fit.sigma2_restricted == pytest.approx(np.mean(X**2))


# -- saturated fit ------------------------------------------------------------

def test_saturated_noiseless_is_zero():
    assert fit_saturated(cell_dataset([[1, 5], [2, 7]], m=3)).sigma2_full == 0.0


def test_saturated_sse_contribution():
    ds = make_dataset([[0, 1], [2, 1], [5, 3]], ["1", "1", "2"])
    assert fit_saturated(ds).sigma2_full == pytest.approx(2.0 / 6)


def test_saturated_one_group_pooled_variance():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(7, 3))
    ds = IndicatorDataset(X, np.zeros(7, int), ("g",))
    expected = np.sum((X - X.mean(axis=0)) ** 2) / X.size
    assert fit_saturated(ds).sigma2_full == pytest.approx(expected, rel=1e-12)


# -- properties ---------------------------------------------------------------

def _random(seed, missing=0.0):
    rng = np.random.default_rng(seed)
    n, p = rng.integers(2, 6), rng.integers(2, 5)
    return rng, random_dataset(rng, n, p, missing=missing)


@given(st.integers(0, 2**32 - 1), st.sampled_from([0.0, 0.25]))
def test_monotone_descent(seed, missing):
    _, ds = _random(seed, missing)
    trace = np.array(_fit(ds).half_step_trace)
    assert np.all(np.diff(trace) <= 1e-12)


@given(st.integers(0, 2**32 - 1), st.sampled_from([0.0, 0.25]))
def test_restricted_never_beats_saturated(seed, missing):
    _, ds = _random(seed, missing)
    assert _fit(ds).sigma2_restricted >= fit_saturated(ds).sigma2_full


@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0), st.booleans())
def test_initialization_scale_invariance(seed, tau, flip):
    _, ds = _random(seed)
    a0 = ds.stats.means[:, 0]
    tau = -tau if flip else tau
    f1 = _fit(ds, alpha0=a0, tol=1e-14)
    f2 = _fit(ds, alpha0=a0 / tau, tol=1e-14)
    np.testing.assert_allclose(f1.fitted_products, f2.fitted_products, atol=1e-7)


@given(st.integers(0, 2**32 - 1))
def test_permutation_equivariance(seed):
    rng, ds = _random(seed)
    fit = _fit(ds, tol=1e-14)
    pi = rng.permutation(ds.n_indicators)
    pz = rng.permutation(ds.n_groups)
    permuted = IndicatorDataset(ds.values[:, pi], pz[ds.group], ds.group_names)
    pfit = _fit(permuted, tol=1e-14)
    np.testing.assert_allclose(
        pfit.fitted_products, fit.fitted_products[pi][:, np.argsort(pz)], atol=1e-6
    )
    assert pfit.sigma2_restricted == pytest.approx(fit.sigma2_restricted, rel=1e-9)
    assert fit_saturated(permuted).sigma2_full == pytest.approx(
        fit_saturated(ds).sigma2_full, rel=1e-12
    )


@given(st.integers(0, 2**32 - 1))
def test_matches_spectral_oracle_on_complete_data(seed):
    _, ds = _random(seed)
    fit = _fit(ds, tol=1e-15)
    orc = weighted_rank1(cell_means(ds))
    assert orc.method == "spectral"
    assert abs(fit.lack_of_fit - orc.lack_of_fit) < 1e-8
    np.testing.assert_allclose(fit.fitted_products, orc.fitted_products, atol=1e-5)


@given(st.integers(0, 2**32 - 1))
def test_incomplete_data_no_worse_than_restart_oracle(seed):
    _, ds = _random(seed, missing=0.3)
    fit = _fit(ds, tol=1e-15)
    orc = weighted_rank1(cell_means(ds))
    # the restart oracle is heuristic here; the ALS optimum should not be beaten
    assert fit.lack_of_fit <= orc.lack_of_fit + 1e-8

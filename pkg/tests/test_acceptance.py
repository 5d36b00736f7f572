"""Acceptance suite: eight criteria, each reported as one PASS/FAIL line.

Run under pytest (lines appear in the terminal summary) or directly with
``python tests/test_acceptance.py``. Tolerances are the contract values and
are not loosened here; a criterion that does not hold shows up as FAIL.
"""

import math
import sys

import numpy as np
import pytest
from scipy import stats

from structest.diagnostics import ReliabilityVector, implied_reliability_ratios, proportionality_residuals
from structest.estimator import fit_restricted, fit_saturated
from structest.lrt import TestOptions, chi_sq_sf, degrees_of_freedom, run_test
from structest.model import IndicatorDataset, cell_means
from structest.montecarlo import power_curve, rejection_rate
from structest.oracle import weighted_rank1
from structest.simulate import ScenarioSpec, generate, population_cell_means

LAM = (0.9, 0.8, 0.7, 0.6, 0.5)
NULL_SPEC = ScenarioSpec(n=5, lam=LAM, N=2000, eta_shift=(0.0, 0.3))
SEED = 20240501

# (number, title) -> (passed, detail); filled as criteria run
RESULTS: dict[tuple[int, str], tuple[bool, str]] = {}


def _record(num, title, ok, detail):
    RESULTS[(num, title)] = (bool(ok), detail)
    return ok, detail


def _line(num, title, ok, detail):
    return f"[{'PASS' if ok else 'FAIL'}] {num}. {title}: {detail}"


def _random_complete(rng, n_max=5, p_max=5, N_max=200):
    n = int(rng.integers(2, n_max + 1))
    p = int(rng.integers(2, p_max + 1))
    N = int(rng.integers(2 * p, N_max + 1))
    group = np.concatenate([np.arange(p), rng.integers(0, p, size=N - p)])
    X = rng.normal(size=(N, n)) * rng.uniform(0.2, 3.0) + rng.normal(size=(1, n))
    X += rng.normal(scale=0.5, size=(n, p))[:, group].T
    return IndicatorDataset(X, group, tuple(str(k + 1) for k in range(p)))


def criterion_1():
    x, df = 67.23, 4
    p = chi_sq_sf(x, df)
    closed = math.exp(-x / 2) * (1 + x / 2)
    rel = abs(p - 8.7e-14) / 8.7e-14
    ok = rel <= 0.02 and abs(p - closed) <= 1e-10
    return _record(1, "chi-square tail anchor", ok,
                   f"p={p:.4e}, rel. err vs 8.7e-14 = {rel:.4f}, |p - closed form| = {abs(p - closed):.1e}")


def criterion_2():
    ok = degrees_of_freedom(5, 2) == 4
    bad = [(n, p) for n in range(1, 21) for p in range(1, 21)
           if degrees_of_freedom(n, p) != n * p - (n + p - 1)]
    ok = ok and not bad
    return _record(2, "degrees of freedom", ok, f"df(5,2)={degrees_of_freedom(5, 2)}, "
                   f"{400 - len(bad)}/400 grid points match np-(n+p-1)")


def _size_check(num, title, spec, lo, hi):
    res = rejection_rate(spec, 0.05, replicates=2000, seed=SEED)
    ks = stats.kstest(res.p_values, "uniform").pvalue
    ok = lo <= res.rate <= hi and ks > 0.01
    return _record(num, title, ok, f"rate={res.rate:.4f} (target [{lo}, {hi}]), "
                   f"KS p={ks:.2e} (needs > 0.01), 95% CI [{res.ci_low:.4f}, {res.ci_high:.4f}]")


def criterion_3():
    return _size_check(3, "size under the structural null", NULL_SPEC, 0.04, 0.06)


def criterion_4():
    spec = NULL_SPEC.replace(scenario="confounded", confounder_strength=0.5)
    return _size_check(4, "size under the confounded null", spec, 0.03, 0.07)


def _direct(shift):
    rows = ((0.0, shift),) + ((0.0, 0.0),) * 4
    # a nonzero latent mean is needed: with mu = 0 a shift on one indicator in
    # one group leaves the 2-group mean matrix rank 1 and the test has no power
    return ScenarioSpec(n=5, lam=LAM, N=5000, eta_mean=1.0, scenario="direct", direct_shift=rows)


def criterion_5():
    main = rejection_rate(_direct(0.5), 0.05, replicates=1000, seed=SEED)
    curve = power_curve([_direct(s) for s in (0.0, 0.1, 0.2, 0.4)], 0.05, 1000, SEED)
    inversions = [
        (a, b) for a, b in zip(curve, curve[1:]) if b.rate < a.rate
    ]
    curve_ok = len(inversions) <= 1 and all(b.ci_high >= a.ci_low for a, b in inversions)
    ok = main.rate >= 0.99 and curve_ok
    rates = ", ".join(f"{r.rate:.3f}" for r in curve)
    return _record(5, "power against a direct effect", ok,
                   f"rate at shift 0.5 = {main.rate:.3f} (needs >= 0.99); curve (0, .1, .2, .4) = {rates}")


def criterion_6():
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(50):
        ds = _random_complete(rng)
        fit = fit_restricted(ds, tol=1e-15, max_iter=100_000)
        orc = weighted_rank1(cell_means(ds))
        worst = max(worst, abs(fit.lack_of_fit - orc.lack_of_fit))
    hand = []
    for m in (1, 3, 7):
        X = np.repeat(np.array([[2.0, 1.0], [1.0, 1.0]]).T, m, axis=0)
        ds = IndicatorDataset(X, np.repeat([0, 1], m), ("1", "2"))
        lof = fit_restricted(ds, tol=1e-15, max_iter=100_000).lack_of_fit
        hand.append(abs(lof - m * (7 - math.sqrt(45)) / 2))
    ok = worst <= 1e-8 and max(hand) <= 1e-8
    return _record(6, "oracle equivalence", ok,
                   f"max |ALS - oracle| over 50 instances = {worst:.1e}; "
                   f"[[2,1],[1,1]] closed form err = {max(hand):.1e}")


def criterion_7():
    rng = np.random.default_rng(SEED + 7)
    tight = TestOptions(tol=1e-15, max_iter=100_000)
    failures = {"monotone": 0, "rescale": 0, "lrt>=0": 0, "scale": 0, "permute": 0}
    for _ in range(200):
        ds = _random_complete(rng)
        if rng.random() < 0.3:
            X = np.array(ds.values)
            drop = rng.random(X.shape) < 0.15
            drop[: ds.n_groups] = False  # first rows cover every group
            X[drop] = np.nan
            ds = IndicatorDataset(X, ds.group, ds.group_names)
        fit = fit_restricted(ds, tol=1e-15, max_iter=100_000)
        if np.any(np.diff(fit.mse_trace) > 1e-12) or np.any(np.diff(fit.half_step_trace) > 1e-12):
            failures["monotone"] += 1
        a0 = ds.stats.means[:, 0]
        tau = float(rng.choice([-1, 1]) * 10 ** rng.uniform(-2, 2))
        f2 = fit_restricted(ds, tol=1e-15, max_iter=100_000, alpha0=a0 * tau)
        f1 = fit_restricted(ds, tol=1e-15, max_iter=100_000, alpha0=a0)
        if not np.allclose(f1.fitted_products, f2.fitted_products, atol=1e-7):
            failures["rescale"] += 1
        res = run_test(ds, tight)
        if res.statistic < 0:
            failures["lrt>=0"] += 1
        c = float(10 ** rng.uniform(-3, 3))
        scaled = run_test(IndicatorDataset(ds.values * c, ds.group, ds.group_names), tight)
        if not (math.isclose(scaled.statistic, res.statistic, rel_tol=1e-7, abs_tol=1e-9)
                and scaled.df == res.df
                and math.isclose(scaled.p_value, res.p_value, rel_tol=1e-6, abs_tol=1e-12)):
            failures["scale"] += 1
        pz = rng.permutation(ds.n_groups)
        pi = rng.permutation(ds.n_indicators)
        names = tuple(ds.group_names[k] for k in np.argsort(pz))
        perm = run_test(IndicatorDataset(ds.values[:, pi], pz[ds.group], names), tight)
        if not (math.isclose(perm.statistic, res.statistic, rel_tol=1e-7, abs_tol=1e-9)
                and perm.df == res.df
                and math.isclose(perm.p_value, res.p_value, rel_tol=1e-6, abs_tol=1e-12)):
            failures["permute"] += 1
        assert fit_saturated(ds).sigma2_full <= fit.sigma2_restricted
    ok = not any(failures.values())
    detail = ", ".join(f"{k}: {200 - v}/200" for k, v in failures.items())
    return _record(7, "estimator invariants", ok, detail)


def criterion_8():
    rng = np.random.default_rng(SEED + 8)
    worst_pop = 0.0
    for _ in range(200):
        n, p = int(rng.integers(2, 7)), int(rng.integers(2, 6))
        lam = rng.choice([-1, 1], size=n) * rng.uniform(0.1, 2.0, size=n)
        spec = ScenarioSpec(
            n=n, lam=lam, N=1, eta_mean=float(rng.normal()), eta_shift=rng.normal(size=p),
            group_probs=(1 / p,) * p,
        )
        E = population_cell_means(spec)
        lam_v = ReliabilityVector(spec.lam)
        R = lam_v.lam[:, None, None] * E[None, :, :] - lam_v.lam[None, :, None] * E[:, None, :]
        # exact in real arithmetic; in floating point the two products differ
        # only by rounding, so measure in units of the largest product
        scale = np.abs(lam_v.lam).max() * max(np.abs(E).max(), 1e-300)
        worst_pop = max(worst_pop, float(np.abs(R).max()) / scale)
    # the latent mean must be away from zero for the loadings to be well identified
    spec = NULL_SPEC.replace(N=20_000, eta_mean=1.0)
    ds = generate(spec, SEED)
    ratios = implied_reliability_ratios(fit_restricted(ds), 0)
    err = float(np.abs(ratios - np.array(LAM) / LAM[0]).max())
    sample_resid = float(np.abs(proportionality_residuals(cell_means(ds), ReliabilityVector(LAM))).max())
    ok = worst_pop <= 8 * np.finfo(float).eps and err <= 0.05
    return _record(8, "population identity and implied loadings", ok,
                   f"max relative population residual = {worst_pop:.1e} (rounding only, <= 8 eps); "
                   f"max |ratio - lambda_i/0.9| = {err:.4f} (needs <= 0.05); "
                   f"sample residual at N=20000 = {sample_resid:.3f}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4,
            criterion_5, criterion_6, criterion_7, criterion_8]


def informational_small_latent_spread():
    """Size with the within-group latent spread nearly removed (not a criterion)."""
    lines = []
    for label, spec in [
        ("structural null, eta_sd=0.05", NULL_SPEC.replace(eta_sd=0.05)),
        ("confounded null, eta_sd=0.05", NULL_SPEC.replace(
            eta_sd=0.05, scenario="confounded", confounder_strength=0.5)),
    ]:
        res = rejection_rate(spec, 0.05, replicates=2000, seed=SEED)
        ks = stats.kstest(res.p_values, "uniform").pvalue
        lines.append(f"[INFO] {label}: rate={res.rate:.4f}, KS p={ks:.2e}")
    return lines


@pytest.mark.parametrize("check", CRITERIA, ids=lambda f: f.__name__)
def test_acceptance(check):
    num = CRITERIA.index(check) + 1
    try:
        ok, detail = check()
    except Exception as exc:
        _record(num, check.__name__, False, f"raised {type(exc).__name__}: {exc}")
        raise
    assert ok, detail


@pytest.mark.slow
def test_informational_small_latent_spread():
    # recorded for context next to criteria 3 and 4; asserts only that it runs
    RESULTS[(0, "info")] = (True, "\n".join(informational_small_latent_spread()))


def summary_lines():
    out = []
    for (num, title), (ok, detail) in sorted(RESULTS.items(), key=lambda kv: kv[0][0] or 99):
        out.append(detail if num == 0 else _line(num, title, ok, detail))
    return out


if __name__ == "__main__":
    failed = 0
    for check in CRITERIA:
        try:
            ok, _ = check()
        except Exception as exc:  # report and keep going
            num = CRITERIA.index(check) + 1
            _record(num, check.__name__, False, f"raised {type(exc).__name__}: {exc}")
            ok = False
        failed += not ok
    RESULTS[(0, "info")] = (True, "\n".join(informational_small_latent_spread()))
    print("\n".join(summary_lines()))
    sys.exit(1 if failed else 0)

"""Null rejection rate as the within-group spread of the latent shrinks.

The LRT pools every indicator into one error variance, so latent variation
inside a group inflates the saturated variance estimate and deflates the
statistic by roughly 1 + mean(lambda^2) * eta_sd^2. This script shows the
observed size next to that prediction.
"""

import argparse
import json

import numpy as np
from scipy import stats

from structest import ScenarioSpec, rejection_rate
from structest.lrt import chi_sq_sf


def predicted_size(spec: ScenarioSpec, alpha: float, df: int) -> float:
    lam = np.array(spec.lam)
    inflate = 1.0 + np.mean(lam**2 * spec.eta_sd**2) / np.mean(np.square(spec.noise_sd))
    crit = stats.chi2.isf(alpha, df)
    return chi_sq_sf(crit * inflate, df)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--replicates", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--alpha", type=float, default=0.05)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--eta-sd", default="1.0,0.5,0.25,0.1,0.05")
    ap.add_argument("--scenario", default="structural", choices=["structural", "confounded"])
    ap.add_argument("--json", action="store_true", help="print JSON rows instead of a table")
    args = ap.parse_args()

    base = ScenarioSpec(n=5, lam=(0.9, 0.8, 0.7, 0.6, 0.5), N=2000, eta_shift=(0.0, 0.3))
    if args.scenario == "confounded":
        base = base.replace(scenario="confounded", confounder_strength=0.5)
    rows = []
    for sd in (float(v) for v in args.eta_sd.split(",")):
        spec = base.replace(eta_sd=sd)
        res = rejection_rate(spec, args.alpha, args.replicates, args.seed, workers=args.workers)
        rows.append({
            "eta_sd": sd,
            "rate": res.rate,
            "ci": [res.ci_low, res.ci_high],
            "predicted": predicted_size(spec, args.alpha, 4),
            "ks_p": stats.kstest(res.p_values, "uniform").pvalue,
        })
    if args.json:
        print(json.dumps(rows, indent=2))
        return
    print(f"{'eta_sd':>7} {'rate':>7} {'95% CI':>17} {'predicted':>10} {'KS p':>10}")
    for r in rows:
        lo, hi = r["ci"]
        print(f"{r['eta_sd']:7.3f} {r['rate']:7.4f}  [{lo:.4f}, {hi:.4f}] "
              f"{r['predicted']:10.4f} {r['ks_p']:10.2e}")


if __name__ == "__main__":
    main()

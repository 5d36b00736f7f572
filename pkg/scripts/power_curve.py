"""Power against a direct effect on the first indicator, over effect size and N."""

import argparse

from structest import ScenarioSpec, power_curve

LAM = (0.9, 0.8, 0.7, 0.6, 0.5)


def direct_spec(shift: float, N: int, eta_mean: float) -> ScenarioSpec:
    rows = ((0.0, shift),) + ((0.0, 0.0),) * (len(LAM) - 1)
    return ScenarioSpec(n=len(LAM), lam=LAM, N=N, eta_mean=eta_mean, scenario="direct",
                        direct_shift=rows)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--shifts", default="0,0.05,0.1,0.2,0.4")
    ap.add_argument("--N", default="500,2000,5000")
    ap.add_argument("--eta-mean", type=float, default=1.0)
    ap.add_argument("--replicates", type=int, default=500)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    shifts = [float(s) for s in args.shifts.split(",")]
    sizes = [int(n) for n in args.N.split(",")]
    print("N \\ shift " + "".join(f"{s:>9.3g}" for s in shifts))
    for N in sizes:
        grid = [direct_spec(s, N, args.eta_mean) for s in shifts]
        rows = power_curve(grid, 0.05, args.replicates, args.seed, workers=args.workers)
        print(f"{N:<10d}" + "".join(f"{r.rate:9.3f}" for r in rows))


if __name__ == "__main__":
    main()

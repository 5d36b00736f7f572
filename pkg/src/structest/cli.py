"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import json
import os
import shlex
import sys

import numpy as np

from . import __version__
from .diagnostics import ReliabilityVector, diagnostic_tables
from .errors import DataError, IoError, NumericalError, StructestError, Unsupported
from .estimator import fit_restricted
from .io import ReportDocument, dataset_to_csv, atomic_write, read_csv, write_dataset_csv, write_report
from .lrt import TestOptions, run_stratified, run_test
from .model import cell_means, validate
from .montecarlo import ReplicateFailed, power_curve
from .oracle import chi_sq_sf_even, weighted_rank1
from .simulate import SCENARIOS, ScenarioSpec, generate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
SEED_ENV = "STRUCTEST_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _names(text):
    return [t.strip() for t in text.split(",") if t.strip()] if text else None


def _floats(text, what="list"):
    try:
        return [float(t) for t in text.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse {what} {text!r} as comma-separated numbers") from None


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _add_input(sp):
    sp.add_argument("csv", help="wide CSV file, one row per subject")
    sp.add_argument("--indicators", help="comma-separated indicator columns (default: all others)")
    sp.add_argument("--group", default="z", help="group column (default: z)")


def _add_output(sp, default_format="json"):
    sp.add_argument("--out", default="-", help="output path ('-' for stdout)")
    sp.add_argument("--format", default=default_format, choices=["json", "csv-table", "text"])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="structest", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"structest {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    t = sub.add_parser("test", help="likelihood-ratio test of the rank-1 mean structure")
    _add_input(t)
    t.add_argument("--strata", help="comma-separated stratum columns; tests within strata")
    t.add_argument("--tol", type=float, default=1e-9)
    t.add_argument("--max-iter", type=int, default=500)
    t.add_argument("--ref-group", help="group whose means initialize alpha")
    t.add_argument("--oracle", action="store_true",
                   help="cross-check the fit and p-value against independent oracles")
    t.add_argument("--diagnostics", action="store_true",
                   help="include implied-loading diagnostic tables")
    t.add_argument("--dump", metavar="PATH", help="also write the parsed data back as CSV")
    _add_output(t)

    s = sub.add_parser("simulate", help="generate a synthetic dataset as CSV")
    s.add_argument("--spec", help="JSON scenario spec file (flags override its fields)")
    s.add_argument("--scenario", choices=SCENARIOS)
    s.add_argument("--n", type=int, help="number of indicators")
    s.add_argument("--p", type=int, help="number of groups")
    s.add_argument("--N", type=int, help="number of subjects")
    s.add_argument("--seed", type=int, help=f"random seed (default: ${SEED_ENV} or 0)")
    s.add_argument("--lambda", dest="lam", help="comma-separated loadings")
    s.add_argument("--noise-sd", help="comma-separated error SDs")
    s.add_argument("--eta-mean", type=float)
    s.add_argument("--eta-sd", type=float)
    s.add_argument("--eta-shift", help="comma-separated shift of the latent per group")
    s.add_argument("--direct-shift", help="rows separated by ';', entries by ',' (n x p)")
    s.add_argument("--group-probs", help="comma-separated group probabilities")
    s.add_argument("--confounder-strength", type=float)
    s.add_argument("--outcome-indicator", type=int, help="1-based efficacious indicator")
    s.add_argument("--outcome-strength", type=float)
    s.add_argument("--noise-dist", choices=["gaussian", "uniform"])
    s.add_argument("--missing-prob", type=float)
    s.add_argument("--allow-mixed", action="store_true")
    s.add_argument("--write-spec", metavar="PATH", help="save the resolved spec as JSON")
    s.add_argument("--out", default="-")

    c = sub.add_parser("calibrate", help="Monte Carlo rejection rate of the test")
    c.add_argument("spec", help="JSON spec file: one spec, a list, or {\"grid\": [...]}")
    c.add_argument("--alpha", type=float, default=0.05)
    c.add_argument("--replicates", type=int, default=1000)
    c.add_argument("--seed", type=int, help=f"master seed (default: ${SEED_ENV} or 0)")
    c.add_argument("--workers", type=int, default=1)
    c.add_argument("--p-values", action="store_true", help="include replicate p-values")
    _add_output(c)

    d = sub.add_parser("diagnose", help="scaled contrasts and proportionality residuals")
    _add_input(d)
    g = d.add_mutually_exclusive_group(required=True)
    g.add_argument("--lambda", dest="lam", help="comma-separated loadings")
    g.add_argument("--implied", action="store_true", help="use alpha from the rank-1 fit")
    d.add_argument("--ref-group", help="reference group for contrasts (default: first)")
    _add_output(d, default_format="text")
    return parser


def _oracle_check(dataset, result) -> dict:
    orc = weighted_rank1(cell_means(dataset))
    out = {
        "method": orc.method,
        "oracle_lack_of_fit": orc.lack_of_fit,
        "als_lack_of_fit": result.fit.lack_of_fit,
        "lack_of_fit_diff": abs(orc.lack_of_fit - result.fit.lack_of_fit),
    }
    if result.df % 2 == 0 and result.df <= 20:
        ref = chi_sq_sf_even(result.statistic, result.df)
        out["closed_form_p_value"] = ref
        out["p_value_diff"] = abs(ref - result.p_value)
    return out


def _cmd_test(args, invocation) -> int:
    strata = _names(args.strata)
    ds = read_csv(args.csv, _names(args.indicators), args.group, strata)
    if args.dump:
        write_dataset_csv(ds, args.dump, args.group)
    opts = TestOptions(tol=args.tol, max_iter=args.max_iter, ref_group=args.ref_group)
    diagnostics = {}
    if strata:
        res = run_stratified(ds, opts)
        kind = "stratified"
        if args.oracle:
            diagnostics["oracle"] = [
                {"stratum": label, **_oracle_check(ds.subset(ds.strata == k), r)}
                for k, (label, r) in enumerate(res.per_stratum)
            ]
    else:
        res = run_test(ds, opts)
        kind = "test"
        if args.diagnostics and not res.fit.degenerate:
            diagnostics = diagnostic_tables(
                cell_means(ds), ReliabilityVector.from_fit(res.fit), res.fit
            )
        if args.oracle:
            diagnostics["oracle"] = _oracle_check(ds, res)
    doc = ReportDocument(invocation, validate(ds).to_dict(), kind, res.to_dict(), diagnostics)
    write_report(doc, args.out, args.format)
    return EXIT_OK


def _resolve_spec(args) -> ScenarioSpec:
    if args.spec:
        try:
            with open(args.spec) as fh:
                base = json.load(fh)
        except OSError as exc:
            raise IoError(f"cannot read {args.spec}: {exc.strerror}") from exc
    else:
        n = args.n or 5
        p = args.p or 2
        base = ScenarioSpec.default(n=n, p=p, N=args.N or 1000).to_dict()
    overrides = {
        "scenario": args.scenario,
        "N": args.N,
        "eta_mean": args.eta_mean,
        "eta_sd": args.eta_sd,
        "confounder_strength": args.confounder_strength,
        "outcome_strength": args.outcome_strength,
        "noise_dist": args.noise_dist,
        "missing_prob": args.missing_prob,
    }
    if args.lam:
        overrides["lambda"] = _floats(args.lam, "--lambda")
    if args.noise_sd:
        overrides["noise_sd"] = _floats(args.noise_sd, "--noise-sd")
    if args.eta_shift:
        overrides["eta_shift"] = _floats(args.eta_shift, "--eta-shift")
    if args.group_probs:
        overrides["group_probs"] = _floats(args.group_probs, "--group-probs")
    if args.direct_shift:
        overrides["direct_shift"] = [
            _floats(row, "--direct-shift") for row in args.direct_shift.split(";")
        ]
    if args.outcome_indicator is not None:
        overrides["outcome_indicator"] = args.outcome_indicator - 1
    if args.allow_mixed:
        overrides["allow_mixed"] = True
    base.update({k: v for k, v in overrides.items() if v is not None})
    if args.spec is None:
        # sizes may have changed through the overrides; rebuild dependent defaults
        n = len(base["lambda"])
        p = len(base["group_probs"])
        base["n"] = n
        if len(base["noise_sd"]) != n and not args.noise_sd:
            base["noise_sd"] = [1.0] * n
        if len(base["eta_shift"]) != p and not args.eta_shift:
            base["eta_shift"] = [0.0] * p
        if not args.direct_shift and (
            len(base["direct_shift"]) != n or any(len(r) != p for r in base["direct_shift"])
        ):
            base["direct_shift"] = [[0.0] * p for _ in range(n)]
    return ScenarioSpec.from_dict(base)


def _cmd_simulate(args, invocation) -> int:
    spec = _resolve_spec(args)
    seed = args.seed if args.seed is not None else _default_seed()
    ds = generate(spec, seed)
    if args.write_spec:
        atomic_write(args.write_spec, json.dumps(spec.to_dict(), indent=2) + "\n")
    atomic_write(args.out, dataset_to_csv(ds))
    return EXIT_OK


def _load_grid(path) -> list[ScenarioSpec]:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from exc
    if isinstance(raw, dict) and "grid" in raw:
        raw = raw["grid"]
    if isinstance(raw, dict):
        raw = [raw]
    return [ScenarioSpec.from_dict(d) for d in raw]


def _cmd_calibrate(args, invocation) -> int:
    grid = _load_grid(args.spec)
    seed = args.seed if args.seed is not None else _default_seed()
    try:
        results = power_curve(grid, args.alpha, args.replicates, seed, workers=args.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = [r.to_dict(include_p_values=args.p_values) for r in results]
    doc = ReportDocument(invocation, None, "calibration", rows if len(rows) > 1 else rows[0])
    write_report(doc, args.out, args.format)
    return EXIT_OK


def _cmd_diagnose(args, invocation) -> int:
    ds = read_csv(args.csv, _names(args.indicators), args.group)
    cm = cell_means(ds)
    fit = None
    if args.implied:
        fit = fit_restricted(ds)
        if fit.degenerate:
            raise DataError("all group means are zero; no implied loadings")
        lam = ReliabilityVector.from_fit(fit)
    else:
        lam = ReliabilityVector(np.array(_floats(args.lam, "--lambda")))
    tables = diagnostic_tables(cm, lam, fit, args.ref_group)
    doc = ReportDocument(invocation, validate(ds).to_dict(), "diagnose", {}, tables)
    write_report(doc, args.out, args.format)
    return EXIT_OK


COMMANDS = {
    "test": _cmd_test,
    "simulate": _cmd_simulate,
    "calibrate": _cmd_calibrate,
    "diagnose": _cmd_diagnose,
}


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, ReplicateFailed):
        return _exit_code(exc.cause)
    if isinstance(exc, NumericalError):
        return EXIT_NUMERIC
    if isinstance(exc, (DataError, IoError, Unsupported, StructestError)):
        return EXIT_DATA
    return EXIT_USAGE


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    invocation = shlex.join(["structest", *argv])
    try:
        return COMMANDS[args.command](args, invocation)
    except UsageError as exc:
        print(f"structest: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StructestError as exc:
        print(f"structest: {type(exc).__name__}: {exc}", file=sys.stderr)
        return _exit_code(exc)

"""Command-line interface: fit, cv, simulate, and bench subcommands.

All CSV outputs are deterministic for a fixed configuration and seed;
wall-clock timings are quarantined to the JSON summaries.  Errors exit
nonzero with a machine-readable JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import backends
from .cv import cross_validate, default_lambda_path
from .data import load_dataset, standardize, unstandardize
from .groups import fit_group_path_standardized
from .path import CoefPath, fit_path_standardized
from .penalties import PenaltySpec
from .simulate import SimDesign, violation_experiment
from .solver import DEFAULT_TOL

SCHEMA_VERSION = 1
PENALTY_NAMES = {
    "lasso": "lasso",
    "mcp": "mcp",
    "scad": "scad",
    "mnet": "mnet",
    "gmcp": "group-mcp",
    "gscad": "group-scad",
}
DEFAULT_GAMMA = {
    "lasso": 3.0, "mcp": 3.0, "mnet": 3.0, "group-mcp": 3.0,
    "scad": 4.0, "group-scad": 4.0,
}


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsecd",
        description="Nonconvex penalized regression paths with strong-rule screening",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p, data=True):
        if data:
            p.add_argument("--x", help="covariate CSV (n rows, p columns)")
            p.add_argument("--y", help="response CSV (n rows)")
            p.add_argument("--groups", help="group file, one integer per line")
            p.add_argument("--header", action="store_true",
                           help="skip the first row of the CSV inputs")
        p.add_argument("--family", choices=["gaussian", "binomial", "poisson"],
                       default="gaussian")
        p.add_argument("--penalty", choices=sorted(PENALTY_NAMES), default="mcp")
        p.add_argument("--gamma", type=float, default=None,
                       help="concavity parameter (default 3 for MCP-type, 4 for SCAD-type)")
        p.add_argument("--alpha", type=float, default=1.0,
                       help="Mnet mixing parameter in (0, 1]")
        p.add_argument("--nlambda", type=int, default=100)
        p.add_argument("--lambda-min-ratio", type=float, default=0.05)
        p.add_argument("--strategy", choices=["cyclic", "strong", "active", "hybrid"],
                       default="hybrid")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--tol", type=float, default=DEFAULT_TOL)
        p.add_argument("--out-prefix", required=True)

    fit = sub.add_parser("fit", help="fit a coefficient path")
    add_common(fit)

    cv = sub.add_parser("cv", help="cross-validate lambda")
    add_common(cv)
    cv.add_argument("--folds", type=int, default=10)

    sim = sub.add_parser("simulate", help="run the violation experiment")
    add_common(sim, data=False)
    sim.add_argument("--n", type=int, default=200)
    sim.add_argument("--p", type=int, default=2000)
    sim.add_argument("--rho", type=float, default=0.0)
    sim.add_argument("--block-size", type=int, default=None,
                     help="use a block-correlated design with this block size")
    sim.add_argument("--n-signal", type=int, default=20)
    sim.add_argument("--signal", type=float, default=None,
                     help="signal magnitude (default 1 gaussian, 0.5 GLM)")
    sim.add_argument("--coding", choices=["alternating", "positive", "group-alternating"],
                     default="alternating")
    sim.add_argument("--snr", type=float, default=None)
    sim.add_argument("--replicates", type=int, default=20)
    sim.add_argument("--detail", action="store_true",
                     help="also write the per-replicate CSV")

    bench = sub.add_parser("bench", help="time all four strategies on one instance")
    add_common(bench)
    bench.add_argument("--n", type=int, default=200)
    bench.add_argument("--p", type=int, default=20000)
    bench.add_argument("--rho", type=float, default=0.5)
    bench.add_argument("--n-signal", type=int, default=20)
    bench.add_argument("--signal", type=float, default=None)
    bench.add_argument("--coding", choices=["alternating", "positive", "group-alternating"],
                       default="alternating")
    bench.add_argument("--snr", type=float, default=None)
    bench.add_argument("--repeats", type=int, default=3,
                       help="timing runs per strategy (median reported)")
    return parser


def make_spec(args) -> PenaltySpec:
    family = PENALTY_NAMES[args.penalty]
    gamma = args.gamma if args.gamma is not None else DEFAULT_GAMMA[family]
    return PenaltySpec(family, gamma=gamma, alpha=args.alpha)


def _load(args):
    if not args.x or not args.y:
        raise ValueError("--x and --y are required for this subcommand")
    return load_dataset(args.x, args.y, family=args.family,
                        group_path=args.groups, header=args.header)


def write_path_csv(prefix: str, path: CoefPath) -> str:
    out = f"{prefix}_path.csv"
    with open(out, "w") as fh:
        cols = ["lambda", "intercept"] + [f"V{j + 1}" for j in range(path.p)]
        fh.write(",".join(cols) + "\n")
        for k in range(path.m):
            row = [_fmt(path.lambdas[k]), _fmt(path.intercept[k])]
            row += [_fmt(b) for b in path.beta[k]]
            fh.write(",".join(row) + "\n")
    return out


def write_violation_csv(prefix: str, path: CoefPath) -> str:
    out = f"{prefix}_violations.csv"
    with open(out, "w") as fh:
        fh.write("lambda_index,lambda,n_violations,locally_convex,indices\n")
        for idx, lam, count, convex, joined in path.violations.csv_rows():
            cflag = "" if convex is None else str(convex).lower()
            fh.write(f"{idx},{_fmt(lam)},{count},{cflag},{joined}\n")
    return out


def _summary_common(args, spec) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "subcommand": args.subcommand,
        "backend": backends.BACKEND,
        "family": args.family,
        "penalty": spec.family,
        "gamma": spec.gamma,
        "alpha": spec.alpha,
        "strategy": getattr(args, "strategy", None),
        "seed": args.seed,
    }


def cmd_fit(args) -> int:
    spec = make_spec(args)
    data = _load(args)
    lams = default_lambda_path(data, spec, args.lambda_min_ratio, args.nlambda)
    sd = standardize(data)
    fitter = fit_group_path_standardized if spec.grouped else fit_path_standardized
    t0 = time.perf_counter()
    path = fitter(sd, spec, lams.values, args.strategy, tol=args.tol)
    elapsed = time.perf_counter() - t0
    path = unstandardize(path, sd)
    files = [write_path_csv(args.out_prefix, path),
             write_violation_csv(args.out_prefix, path)]
    summary = _summary_common(args, spec)
    summary.update({
        "n": data.n,
        "p": data.p,
        "nlambda": len(lams.values),
        "lambda_max": float(lams.values[0]),
        "lambda_star": path.lambda_star,
        "n_violated_lambdas": path.violations.n_violated_lambdas(),
        "n_violated_variables": path.violations.n_violated_variables(),
        "strong_sizes": [int(s) for s in path.strong_size],
        "active_sizes": [int(s) for s in path.active_size],
        "timing_seconds": {"path_fit": elapsed},
    })
    sfile = f"{args.out_prefix}_summary.json"
    with open(sfile, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    print("\n".join(files + [sfile]))
    return 0


def cmd_cv(args) -> int:
    spec = make_spec(args)
    data = _load(args)
    lams = default_lambda_path(data, spec, args.lambda_min_ratio, args.nlambda)
    result = cross_validate(data, spec, lams, args.strategy, args.folds,
                            seed=args.seed, threads=args.threads, tol=args.tol)
    out = f"{args.out_prefix}_cv.csv"
    with open(out, "w") as fh:
        fh.write("lambda,mean_deviance,se,n_nonzero\n")
        for k in range(len(result.lambdas)):
            fh.write(f"{_fmt(result.lambdas[k])},{_fmt(result.mean_deviance[k])},"
                     f"{_fmt(result.se[k])},{result.n_nonzero[k]}\n")
    summary = _summary_common(args, spec)
    summary.update({
        "n": data.n,
        "p": data.p,
        "folds": args.folds,
        "lambda_min": result.lambda_min,
        "lambda_1se": result.lambda_1se,
        "n_nonzero_at_min": int(result.n_nonzero[result.index_min]),
    })
    sfile = f"{args.out_prefix}_summary.json"
    with open(sfile, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    print("\n".join([out, sfile]))
    return 0


def _sim_design(args) -> SimDesign:
    family = args.family
    signal = args.signal
    if signal is None:
        signal = 1.0 if family == "gaussian" else 0.5
    spec_family = PENALTY_NAMES[args.penalty]
    gamma = args.gamma if args.gamma is not None else DEFAULT_GAMMA[spec_family]
    return SimDesign(
        n=args.n, p=args.p, family=family,
        correlation="block" if args.block_size else "common",
        rho=args.rho, block_size=args.block_size,
        n_signal=args.n_signal, signal=signal, coding=args.coding, snr=args.snr,
        penalty=spec_family, gamma=gamma, alpha=args.alpha,
        nlambda=args.nlambda, min_ratio=args.lambda_min_ratio,
        seed=args.seed, replicates=args.replicates,
    )


_SUMMARY_COLS = ("family", "penalty", "rho", "replicates", "unit",
                 "avg_eliminated", "avg_violated_lambdas", "avg_violated_units",
                 "avg_violated_lambdas_convex")


def _cell(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return _fmt(v)
    return str(v)


def cmd_simulate(args) -> int:
    design = _sim_design(args)
    summary, rows = violation_experiment(design, args.strategy, threads=args.threads)
    out = f"{args.out_prefix}_simulate.csv"
    with open(out, "w") as fh:
        fh.write(",".join(_SUMMARY_COLS) + "\n")
        fh.write(",".join(_cell(summary[c]) for c in _SUMMARY_COLS) + "\n")
    files = [out]
    if args.detail:
        dfile = f"{args.out_prefix}_replicates.csv"
        with open(dfile, "w") as fh:
            fh.write("replicate,eliminated,violated_lambdas,violated_units,"
                     "violated_lambdas_convex\n")
            for r in rows:
                fh.write(f"{r['replicate']},{_cell(r['eliminated'])},"
                         f"{r['violated_lambdas']},{r['violated_units']},"
                         f"{_cell(r['violated_lambdas_convex'])}\n")
        files.append(dfile)
    print("\n".join(files))
    return 0


def cmd_bench(args) -> int:
    spec = make_spec(args)
    if args.x and args.y:
        data = _load(args)
    else:
        from .simulate import generate

        design = _sim_design_bench(args)
        data = generate(design, np.random.default_rng(args.seed))
    lams = default_lambda_path(data, spec, args.lambda_min_ratio, args.nlambda)
    sd = standardize(data)
    fitter = fit_group_path_standardized if spec.grouped else fit_path_standardized
    strategies = ("cyclic", "strong", "active", "hybrid")

    paths = {}
    for s in strategies:
        paths[s] = fitter(sd, spec, lams.values, s, tol=args.tol)
    max_dev = 0.0
    for s in strategies[1:]:
        dev = float(np.max(np.abs(paths[s].beta - paths["cyclic"].beta)))
        dev = max(dev, float(np.max(np.abs(paths[s].intercept - paths["cyclic"].intercept))))
        max_dev = max(max_dev, dev)
    equality_tol = 1e-6
    if max_dev > equality_tol:
        raise RuntimeError(
            f"strategy paths disagree (max deviation {max_dev:.3e} > "
            f"{equality_tol:g}); refusing to report timings"
        )

    timings = {}
    for s in strategies:
        runs = []
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            fitter(sd, spec, lams.values, s, tol=args.tol)
            runs.append(time.perf_counter() - t0)
        timings[s] = float(np.median(runs))

    summary = _summary_common(args, spec)
    summary.update({
        "n": data.n,
        "p": data.p,
        "nlambda": len(lams.values),
        "repeats": args.repeats,
        "timings_seconds": timings,
        "equality": {"max_deviation": max_dev, "tolerance": equality_tol,
                     "passed": True},
        "mean_strong_size": float(np.mean(paths["strong"].strong_size)),
        "mean_active_size": float(np.mean(paths["strong"].active_size)),
    })
    sfile = f"{args.out_prefix}_bench.json"
    with open(sfile, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    print(sfile)
    return 0


def _sim_design_bench(args) -> SimDesign:
    signal = args.signal
    if signal is None:
        signal = 1.0 if args.family == "gaussian" else 0.5
    spec_family = PENALTY_NAMES[args.penalty]
    gamma = args.gamma if args.gamma is not None else DEFAULT_GAMMA[spec_family]
    return SimDesign(
        n=args.n, p=args.p, family=args.family, correlation="common",
        rho=args.rho, n_signal=args.n_signal, signal=signal, coding=args.coding,
        snr=args.snr, penalty=spec_family, gamma=gamma, alpha=args.alpha,
        nlambda=args.nlambda, min_ratio=args.lambda_min_ratio, seed=args.seed,
        replicates=1,
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"fit": cmd_fit, "cv": cmd_cv, "simulate": cmd_simulate,
                "bench": cmd_bench}
    try:
        return handlers[args.subcommand](args)
    except Exception as exc:  # noqa: BLE001 - single CLI error boundary
        err = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        print(json.dumps(err), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

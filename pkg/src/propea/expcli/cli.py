"""Command line interface: ``propea {run,sweep,regime,diag,audit}``.

Configuration comes from ``--config FILE`` or ``--scenario NAME``; flags
override the corresponding config keys.  Exit status is 0 on success and 2
on configuration or validation errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, replace

from .. import theory
from ..bitcore import SeedSpec, derive_seed
from ..engine import run, trace_rows
from ..fitness import FitnessSpecError
from .config import SCENARIOS, ConfigError, ExperimentConfig, apply_overrides, scenario
from .experiment import CensoredCellsError, median_runtime_by_n, run_experiment, scaling_fit


def _int_list(s):
    return [int(v) for v in s.split(",")]


def _float_list(s):
    return [float(v) for v in s.split(",")]


def _add_config_args(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="JSON experiment config")
    src.add_argument("--scenario", choices=SCENARIOS)
    p.add_argument("--desk-scale", action=argparse.BooleanOptionalAction, default=True,
                   help="use desk-scale population sizes for named scenarios (default on)")
    p.add_argument("--n", type=_int_list, help="comma-separated string lengths")
    p.add_argument("--lam", "--lambda", dest="lam", type=_int_list, help="comma-separated population sizes")
    p.add_argument("--chi", type=_float_list, help="comma-separated mutation parameters (rate = chi/n)")
    p.add_argument("--selection", choices=["proportionate", "scaled", "uniform", "truncation"])
    p.add_argument("--scale-c", type=float, help="scaling base for --selection scaled")
    p.add_argument("--mu", type=int, help="survivors for --selection truncation")
    p.add_argument("--replications", type=int)
    p.add_argument("--base-seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--cadence", type=int)
    p.add_argument("--max-evaluations", type=int)
    p.add_argument("--max-generations", type=int)
    p.add_argument("--csv")
    p.add_argument("--json")
    p.add_argument("--traces-dir")


def _load(args) -> ExperimentConfig:
    if args.config:
        with open(args.config) as fh:
            raw = json.load(fh)
    else:
        raw = scenario(args.scenario, desk_scale=args.desk_scale)
    raw = apply_overrides(raw, **{k: getattr(args, k, None) for k in (
        "n", "lam", "chi", "selection", "scale_c", "mu", "replications", "base_seed", "workers", "cadence",
        "max_evaluations", "max_generations", "csv", "json", "traces_dir")})
    return ExperimentConfig.from_dict(raw)


def _print_json(obj):
    json.dump(obj, sys.stdout, indent=2, default=float)
    sys.stdout.write("\n")


def cmd_run(args):
    cfg = _load(args)
    cell = cfg.cells()[0]
    seed = args.seed if args.seed is not None else derive_seed(SeedSpec(cfg.base_seed, 0))
    trace = run(replace(cell.run_config, seed=seed))
    if args.trace_csv:
        rows = trace_rows(trace)
        with open(args.trace_csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    _print_json({"cell": cell.params(), "seed": seed, "outcome": trace.outcome, "T": trace.T,
                 "T_coarse": trace.T_coarse, "evaluations": trace.evaluations,
                 "generations": trace.generations, "final_best": trace.final_best,
                 "min_zero_bits_ever": trace.min_zero_bits_ever,
                 "fallback_generations": trace.fallback_generations})


def cmd_sweep(args):
    cfg = _load(args)
    table = run_experiment(cfg)
    summary = {"aggregates": [asdict(a) for a in table.aggregates]}
    if args.fit:
        try:
            fit = scaling_fit(median_runtime_by_n(table))
            summary["scaling_fit"] = {"slope": fit.slope, "intercept": fit.intercept, "residual": fit.residual}
        except (CensoredCellsError, ValueError) as e:
            summary["scaling_fit"] = {"error": str(e)}
    _print_json(summary)


def cmd_diag(args):
    cfg = _load(args)
    cell = cfg.cells()[0]
    seed = args.seed if args.seed is not None else derive_seed(SeedSpec(cfg.base_seed, 0))
    rc = replace(cell.run_config, seed=seed, max_generations=args.generations)
    trace = run(rc)
    rows = trace_rows(trace)
    extra = ["normalized_mean", "mean_zero_bits", "max_alpha", "level_counts"]
    w = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]) + extra)
    w.writeheader()
    for row, rec in zip(rows, trace.records):
        row.update(normalized_mean=rec.normalized_mean, mean_zero_bits=rec.mean_zero_bits,
                   max_alpha=rec.max_alpha, level_counts=" ".join(map(str, rec.level_counts)))
        w.writerow(row)


def _regime(args):
    t = args.regime
    if t == "low-rate":
        return theory.regime_low_rate(args.n, args.a1, args.c, lam=args.lam)
    if t == "low-rate-order":
        return theory.regime_low_rate_order(args.n, args.a1, args.c, args.c_prime, args.K, lam=args.lam,
                                      multiplier=args.multiplier)
    if t == "scaled":
        return theory.regime_scaled(args.n, args.chi, args.c, lam=args.lam)
    if t == "decomposed":
        return theory.regime_decomposed(args.n, args.a1, args.r, args.c, args.c_prime, args.K, lam=args.lam,
                                      multiplier=args.multiplier)
    return theory.negative_regime(args.chi, eps=args.eps, weight_ratio=args.weight_ratio, n=args.n)


def _add_regime_args(p, positional=True):
    choices = ["low-rate", "low-rate-order", "scaled", "decomposed"]
    if positional:
        p.add_argument("regime", choices=["standard-rate"] + choices)
    else:
        p.add_argument("--regime", dest="regime", choices=choices, required=True)
    p.add_argument("--a1", type=int, default=1)
    p.add_argument("--c", type=float, help="rate constant (low-rate regimes) or scaling base (scaled regime)")
    p.add_argument("--c-prime", type=float, default=1.0)
    p.add_argument("--K", type=float, default=3.0)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--weight-ratio", type=float, default=1.0)
    p.add_argument("--multiplier", type=float, default=1.0)


def cmd_regime(args):
    if args.regime in ("low-rate", "low-rate-order", "decomposed") and args.c is None:
        raise ConfigError("--c is required")
    if args.regime == "scaled" and (args.c is None or args.chi is None):
        raise ConfigError("--c and --chi are required")
    if args.regime == "standard-rate" and args.chi is None:
        raise ConfigError("--chi is required")
    if args.regime != "standard-rate" and args.n is None:
        raise ConfigError("--n is required")
    _print_json(_regime(args).to_dict())


def cmd_audit(args):
    cfg = _load(args)
    cell = cfg.cells()[0]
    seed = args.seed if args.seed is not None else derive_seed(SeedSpec(cfg.base_seed, 0))
    rc = replace(cell.run_config, seed=seed, cadence=args.audit_cadence)
    a1 = rc.fitness.max_weight
    c = args.c
    if args.regime == "scaled":
        args.n, args.chi = rc.n, rc.chi
        args.c = c if c is not None else rc.selection.c
    else:
        args.n, args.a1 = rc.n, a1
        if args.regime == "decomposed":
            args.r = rc.fitness.r
        if args.c is None:
            raise ConfigError("--c is required")
    args.lam = rc.lam
    regime = _regime(args)
    if not regime.feasible:
        raise ConfigError("; ".join(regime.reasons))
    rc = replace(rc, gammas=tuple(sorted(set(rc.gammas) | {regime.derived["gamma0"]})))
    trace = run(rc)
    rep = theory.audit_conditions(rc.fitness, regime, rate=rc.rate, trace=trace, lam=rc.lam,
                                  delta=args.delta)
    _print_json({"regime": regime.to_dict(), "outcome": trace.outcome, "audit": rep.to_dict(),
                 "passed": rep.passed})


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="propea", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single run of the first cell")
    _add_config_args(p)
    p.add_argument("--seed", type=int, help="explicit run seed (default: derived from base seed)")
    p.add_argument("--trace-csv")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="all cells x replications")
    _add_config_args(p)
    p.add_argument("--fit", action="store_true", help="log-log scaling fit of median T over n")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("regime", help="evaluate a regime's parameters and bounds")
    _add_regime_args(p)
    p.add_argument("--n", type=int)
    p.add_argument("--chi", type=float)
    p.add_argument("--lam", type=float)
    p.set_defaults(func=cmd_regime)

    p = sub.add_parser("diag", help="per-generation diagnostics of one run as CSV")
    _add_config_args(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--generations", type=int, default=100)
    p.set_defaults(func=cmd_diag)

    p = sub.add_parser("audit", help="run once and audit the level conditions")
    _add_config_args(p)
    _add_regime_args(p, positional=False)
    p.add_argument("--seed", type=int)
    p.add_argument("--delta", type=float, help="override the regime's selective-pressure margin")
    p.add_argument("--audit-cadence", type=int, default=1)
    p.set_defaults(func=cmd_audit)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        args.func(args)
    except (ConfigError, FitnessSpecError, ValueError, OSError) as e:
        print(f"propea: error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

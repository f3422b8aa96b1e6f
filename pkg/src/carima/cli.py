"""Batch command-line interface.

Subcommands: ``analyze`` (counterfactual analysis of a CSV), ``compare``
(adds the step-dummy comparator), ``simulate`` (the replication study) and
``selftest`` (quick internal oracle checks).

Exit codes: 0 success, 1 usage, 2 parse/config, 3 model failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .causal import AnalysisConfig, run_carima
from .dataio import holiday_dummy, ingest_csv, read_holiday_file, weekday_dummies
from .errors import CarimaError, IoError, ParseError
from .regarima import fit_regarima
from .report import emit_report, serialize_report
from .simlab import (
    DEFAULT_HORIZONS,
    DEFAULT_INTERVENTIONS,
    DgpConfig,
    InterventionSpec,
    run_study,
)
from .series import DiffSpec


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="carima", description=__doc__)
    parser.add_argument("--version", action="version", version=f"carima {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_analysis_args(p):
        p.add_argument("--data", required=True, help="input CSV (RFC-4180, header row)")
        p.add_argument("--config", help="JSON analysis config; flags override its keys")
        p.add_argument("--target", help="target column name")
        p.add_argument("--regressors", default=None,
                       help="comma-separated regressor column names")
        p.add_argument("--intervention-date", dest="intervention",
                       help="last untreated day (ISO) or integer count of pre observations")
        p.add_argument("--horizons", help="comma-separated post-period horizons in days")
        p.add_argument("--order", help="p,q,P,Q (fixed order)")
        p.add_argument("--auto-order", action="store_true", help="BIC stepwise order search")
        p.add_argument("--diff", help="d,D,s differencing spec (default 0,0,1)")
        p.add_argument("--log", action="store_true", help="model the natural log of the target")
        p.add_argument("--test", choices=["gaussian", "bootstrap", "both"])
        p.add_argument("--alpha", type=float)
        p.add_argument("--n-boot", type=int, dest="n_boot")
        p.add_argument("--seed", type=int)
        p.add_argument("--weekday-dummies", action="store_true",
                       help="append six day-of-week dummies (Friday baseline)")
        p.add_argument("--holiday-file",
                       help="file of ISO holiday dates; adds a before/after-holiday dummy")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--format", default="csv,json-like,svg",
                       help="comma-separated outputs: csv,json-like,svg")

    p_an = sub.add_parser("analyze", help="counterfactual analysis of one series")
    add_analysis_args(p_an)
    p_cmp = sub.add_parser("compare", help="analysis plus the step-dummy comparator")
    add_analysis_args(p_cmp)
    p_cmp.add_argument("--comparator", default="regarima", choices=["regarima"])

    p_sim = sub.add_parser("simulate", help="Monte-Carlo replication study")
    p_sim.add_argument("--config", help="JSON study config")
    p_sim.add_argument("--reps", type=int, help="number of replications")
    p_sim.add_argument("--seed", type=int, help="master seed")
    p_sim.add_argument("--workers", type=int, default=1)
    p_sim.add_argument("--models", help="comma list: carima_true,carima_bic,regarima_true,regarima_bic")
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--format", default="csv,json-like")

    p_self = sub.add_parser("selftest", help="run quick internal oracle checks")
    p_self.add_argument("--verbose", action="store_true")
    return parser


def _merge_analysis_config(args) -> AnalysisConfig:
    base = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise IoError(f"cannot read config {args.config}: {exc}")
        except json.JSONDecodeError as exc:
            raise ParseError(f"config {args.config}: {exc}")
    if args.target:
        base["series"] = args.target
    if args.regressors is not None:
        base["regressors"] = [c for c in args.regressors.split(",") if c]
    if args.intervention is not None:
        iv = args.intervention
        base["intervention"] = int(iv) if iv.lstrip("-").isdigit() else iv
    if args.horizons:
        base["horizons"] = [int(h) for h in args.horizons.split(",")]
    if args.auto_order:
        base["order"] = "auto"
    elif args.order:
        base["order"] = [int(v) for v in args.order.split(",")]
    if args.diff:
        base["diff"] = [int(v) for v in args.diff.split(",")]
    if args.log:
        base["log_transform"] = True
    if args.test:
        base["test"] = args.test
    if args.alpha is not None:
        base["alpha"] = args.alpha
    if args.n_boot is not None:
        base["n_boot"] = args.n_boot
    if args.seed is not None:
        base["seed"] = args.seed
    for key in ("series", "intervention", "horizons"):
        if key not in base:
            raise _UsageError(f"missing required setting {key!r} (flag or config)")
    if "seed" not in base:
        raise _UsageError("a --seed (or config seed) is mandatory")
    try:
        return AnalysisConfig.from_dict(base)
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"bad analysis config: {exc}")


def _load_dataset(args, config: AnalysisConfig):
    dataset = ingest_csv(args.data)
    data = dict(dataset.columns)
    regressors = list(config.regressors)
    if args.weekday_dummies:
        for name, col in weekday_dummies(dataset.dates).items():
            data[name] = col
            regressors.append(name)
    if args.holiday_file:
        holidays = read_holiday_file(args.holiday_file)
        data["holiday_adjacent"] = holiday_dummy(dataset.dates, holidays)
        regressors.append("holiday_adjacent")
    if regressors != list(config.regressors):
        config = AnalysisConfig.from_dict({**config.to_dict(), "regressors": regressors})
    return dataset, data, config


def _cmd_analyze(args, with_comparator: bool) -> int:
    config = _merge_analysis_config(args)
    dataset, data, config = _load_dataset(args, config)
    report = run_carima(config, data, dates=dataset.dates)
    formats = tuple(f for f in args.format.split(",") if f)
    extra = None
    if with_comparator:
        y = data[config.series]
        if config.log_transform:
            from .series import TimeSeries

            y = TimeSeries(np.log(y.values), y.missing, y.start_index, y.dates)
        X = (
            np.column_stack([data[name].values for name in config.regressors])
            if config.regressors
            else None
        )
        d, D, s = config.diff
        diff = DiffSpec(d=d, D=D, s=s)
        if config.order == "auto":
            order = diff
        else:
            from .sarima import ModelOrder

            p, q, P, Q = config.order
            order = ModelOrder(p, q, P, Q, diff)
        res = fit_regarima(y, X, report.t_star, order,
                           regressor_names=list(config.regressors) or None)
        doc = {
            "schema": "carima-report/1",
            "kind": "comparator",
            "method": "regarima",
            "beta0_hat": res.beta0_hat,
            "std_error": res.std_error,
            "statistic": res.statistic,
            "p_value": res.p_value,
            "interval": list(res.interval(config.alpha)),
            "order": res.model.order.label(),
            "dummy": res.dummy_description,
            "se_method": res.se_method,
        }
        extra = {"comparator.json": serialize_report(doc)}
        print(f"comparator beta0 = {res.beta0_hat:.5f} (se {res.std_error:.5f}, "
              f"p {res.p_value:.4f})")
    emit_report(report, args.out, formats=formats, config=config, extra_files=extra)
    print(f"wrote report bundle to {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    conf = {}
    if args.config:
        try:
            conf = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise IoError(f"cannot read config {args.config}: {exc}")
        except json.JSONDecodeError as exc:
            raise ParseError(f"config {args.config}: {exc}")
    n_reps = args.reps if args.reps is not None else int(conf.get("n_reps", 200))
    seed = args.seed if args.seed is not None else int(conf.get("seed", 20230701))
    workers = args.workers if args.workers != 1 else int(conf.get("workers", 1))
    models = conf.get("models", ["carima_true", "carima_bic", "regarima_true"])
    if args.models:
        models = [m for m in args.models.split(",") if m]
    horizons = tuple(conf.get("horizons", DEFAULT_HORIZONS))
    dgp_overrides = dict(conf.get("dgp", {}))
    if "start_date" in dgp_overrides:
        from datetime import date as _date

        dgp_overrides["start_date"] = _date.fromisoformat(dgp_overrides["start_date"])
    try:
        cfg = DgpConfig(**dgp_overrides) if dgp_overrides else DgpConfig()
    except TypeError as exc:
        raise ParseError(f"bad dgp override: {exc}")
    if "interventions" in conf:
        interventions = tuple(
            InterventionSpec(s["kind"], float(s.get("magnitude", 0.0)))
            for s in conf["interventions"]
        )
    else:
        interventions = DEFAULT_INTERVENTIONS
    tables = run_study(
        n_reps,
        cfg,
        interventions=interventions,
        horizons=horizons,
        models=models,
        master_seed=seed,
        workers=workers,
    )
    formats = tuple(f for f in args.format.split(",") if f)
    emit_report(tables, args.out, formats=formats,
                config={"n_reps": n_reps, "seed": seed, "models": list(models),
                        "horizons": list(horizons)})
    sys.stdout.write(tables.to_text())
    print(f"wrote study bundle to {args.out}")
    return 0


def _cmd_selftest(args) -> int:
    """Tiny built-in oracle suite: fast spot checks of the core numerics."""
    from . import selftest

    results = selftest.run_all(verbose=args.verbose)
    ok = all(passed for _, passed, _ in results)
    for name, passed, detail in results:
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    return 0 if ok else 3


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "analyze":
            return _cmd_analyze(args, with_comparator=False)
        if args.command == "compare":
            return _cmd_analyze(args, with_comparator=True)
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "selftest":
            return _cmd_selftest(args)
        raise _UsageError(f"unknown command {args.command!r}")
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except IoError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4
    except CarimaError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

Every subcommand accepts ``--config FILE`` (JSON); explicit flags override
the matching config keys. Exit status: 0 on success, 2 for invalid input or
configuration, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import calendar as calmod
from .calendar import SpecialDayCalendar, day_serial, load_easter_table
from .errors import ConfigurationError, LoadcastError
from .estimators import HYPERPARAMETERS, EstimatorKind, WeightSurface, fit
from .evaluation import (
    aggregate_forecasts,
    metrics_report,
    residuals,
    write_report_json,
    write_residual_csv,
)
from .experiment import Scenario, SyntheticSpec, grid_search, run_scenario, synth_generate
from .forecast import read_forecast_csv, rolling_forecast, write_forecast_csv
from .series import (
    build_training_pairs,
    ingest_csv,
    preprocess,
    write_diff_csv,
    write_skipped_report,
    write_wide_csv,
)

log = logging.getLogger("loadcast")

ALL_HYPER = ("lam", "lam1", "lam2", "lam_diag", "lam_last", "sigma", "m")


def _calendar(opts) -> SpecialDayCalendar:
    if opts.get("no_special_days"):
        return SpecialDayCalendar.empty()
    return SpecialDayCalendar(
        easter_table=load_easter_table(opts.get("easter_table")),
        easter=not opts.get("no_easter", False),
    )


def _load(opts, key="input", fmt_key="format"):
    path = opts.get(key)
    if not path:
        raise ConfigurationError(f"--{key.replace('_', '-')} is required")
    series = ingest_csv(path, opts.get(fmt_key) or "auto")
    for day, reason in series.skipped:
        log.warning("skipped %s: %s", day.isoformat(), reason)
    return series


def _training_window(opts):
    if opts.get("start") or opts.get("end"):
        if not (opts.get("start") and opts.get("end")):
            raise ConfigurationError("--start and --end go together")
        return (day_serial(opts["start"]), day_serial(opts["end"]))
    if opts.get("train_year") is None:
        raise ConfigurationError("--train-year or --start/--end is required")
    return int(opts["train_year"])


def _hyper(opts, kind):
    hyper = {}
    for name in HYPERPARAMETERS[kind]:
        if opts.get(name) is None:
            raise ConfigurationError(f"{kind.value} needs --{name.replace('_', '-')}")
        hyper[name] = float(opts[name])
    if kind is EstimatorKind.RBF:
        hyper["sigma"] = float(opts.get("sigma") or 4.0)
        hyper["m"] = int(opts.get("m") or 12)
    return hyper


def _require(opts, *keys):
    for key in keys:
        if opts.get(key) is None:
            raise ConfigurationError(f"--{key.replace('_', '-')} is required")


# -- commands ----------------------------------------------------------------


def cmd_ingest(opts):
    _require(opts, "out")
    series = _load(opts)
    write_wide_csv(series, opts["out"])
    if opts.get("skipped_report"):
        write_skipped_report(series.skipped, opts["skipped_report"])
    print(f"{len(series)} days stored, {len(series.skipped)} skipped")


def cmd_preprocess(opts):
    _require(opts, "out")
    Y = preprocess(_load(opts), _calendar(opts))
    write_diff_csv(Y, opts["out"])
    print(f"{len(Y)} differenced days, {int(Y.missing.sum())} masked")


def cmd_fit(opts):
    _require(opts, "kind", "out")
    kind = EstimatorKind.parse(opts["kind"])
    Y = preprocess(_load(opts), _calendar(opts))
    train = build_training_pairs(Y, _training_window(opts))
    surface = fit(kind, train, **_hyper(opts, kind))
    surface.save(opts["out"])
    print(f"{kind.value}: {len(train)} pairs, dof {surface.dof:.2f}")


def _parse_grid(opts):
    grid = opts.get("grid")
    if grid is None:
        return None
    if isinstance(grid, str):
        return [float(v) for v in grid.split(",") if v.strip()]
    return grid


def cmd_cv(opts):
    _require(opts, "kind", "out")
    load = _load(opts)
    window = _training_window(opts)
    val = opts.get("validation_year")
    cv = grid_search(load, _calendar(opts), opts["kind"], window,
                     None if val is None else int(val), _parse_grid(opts),
                     n_jobs=int(opts.get("n_jobs") or 1))
    write_report_json(cv.as_dict(), opts["out"])
    best = cv.best
    print(f"selected {best.hyperparameters} (validation MAPE {best.validation_mape:.4f}%)")


def cmd_forecast(opts):
    _require(opts, "surface", "year", "out")
    surface = WeightSurface.load(opts["surface"])
    fc = rolling_forecast(surface, _load(opts), _calendar(opts), int(opts["year"]))
    write_forecast_csv(fc, opts["out"])
    print(f"{len(fc)} days forecast")


def _read_any_forecast(path, fmt=None):
    with Path(path).open() as fh:
        header = fh.readline().strip().lower()
    if header.startswith("date,q,"):
        return read_forecast_csv(path)
    return ingest_csv(path, fmt or "auto")


def cmd_evaluate(opts):
    _require(opts, "forecast", "actual", "year", "out")
    actual = ingest_csv(opts["actual"], opts.get("format") or "auto")
    pred = _read_any_forecast(opts["forecast"])
    days = calmod.test_day_set(int(opts["year"]), _calendar(opts)) & set(pred.days.tolist())
    bench = None
    if opts.get("benchmark"):
        bench = _read_any_forecast(opts["benchmark"], opts.get("benchmark_format"))
        days &= set(bench.days.tolist())
    days &= set(actual.days.tolist())
    days = sorted(days)
    dof = opts.get("dof")
    report = {"metrics": metrics_report(actual, pred, days, dof=dof).as_dict(),
              "n_day": len(days)}
    if bench is not None:
        bm = metrics_report(actual, bench, days)
        report["benchmark"] = bm.as_dict()
        report["relative_to_benchmark_pct"] = metrics_report(actual, pred, days).relative_to(bm)
    write_report_json(report, opts["out"])
    if opts.get("residuals"):
        write_residual_csv(residuals(actual, pred, days), opts["residuals"])
    m = report["metrics"]
    print(f"MAPE {m['mape_pct']:.3f}%  RMSE {m['rmse_gw']:.3f} GW  MAE {m['mae_gw']:.3f} GW")


def cmd_aggregate(opts):
    _require(opts, "forecasts", "out")
    preds = [_read_any_forecast(p) for p in opts["forecasts"]]
    common = set(preds[0].days.tolist())
    for p in preds[1:]:
        common &= set(p.days.tolist())
    preds = [p.subset(common) for p in preds]
    write_forecast_csv(aggregate_forecasts(preds), opts["out"])
    print(f"averaged {len(preds)} forecasts over {len(common)} days")


def cmd_scenario(opts):
    _require(opts, "out")
    fields = {k: opts[k] for k in Scenario.__dataclass_fields__ if opts.get(k) is not None}
    if "input" in opts and opts.get("input"):
        fields["load_csv"] = opts["input"]
    if opts.get("benchmark"):
        fields["benchmark_csv"] = opts["benchmark"]
    scenario = Scenario.from_dict(fields)
    report = run_scenario(scenario, cal=_calendar(opts))
    write_report_json(report, opts["out"])
    for name, entry in report["models"].items():
        m = entry["metrics"]
        print(f"{name:12s} MAPE {m['mape_pct']:.3f}%  dof {entry['dof']:.2f}")


def cmd_synth(opts):
    _require(opts, "out")
    fields = {k: opts[k] for k in SyntheticSpec.__dataclass_fields__ if opts.get(k) is not None}
    if "n_days" not in fields:
        raise ConfigurationError("--n-days is required")
    if "a_true" in fields and isinstance(fields["a_true"], str):
        fields["a_true"] = np.loadtxt(fields["a_true"], delimiter=",", ndmin=2)
    load, a_true = synth_generate(SyntheticSpec.from_dict(fields))
    write_wide_csv(load, opts["out"])
    print(f"{len(load)} synthetic days written")


COMMANDS = {
    "ingest": cmd_ingest,
    "preprocess": cmd_preprocess,
    "fit": cmd_fit,
    "cv": cmd_cv,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
    "aggregate": cmd_aggregate,
    "scenario": cmd_scenario,
    "synth": cmd_synth,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loadcast", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True, cal=True):
        p.add_argument("--config", help="JSON file with default option values")
        p.add_argument("--out")
        if data:
            p.add_argument("--input", help="load CSV")
            p.add_argument("--format", choices=["auto", "long", "wide"])
        if cal:
            p.add_argument("--easter-table")
            p.add_argument("--no-easter", action="store_true", default=None)
            p.add_argument("--no-special-days", action="store_true", default=None)
        return p

    p = common(sub.add_parser("ingest", help="validate a load CSV"), cal=False)
    p.add_argument("--skipped-report")

    common(sub.add_parser("preprocess", help="write the masked 7-day-difference series"))

    def model_args(p):
        p.add_argument("--kind")
        p.add_argument("--train-year", type=int)
        p.add_argument("--start")
        p.add_argument("--end")
        for name in ALL_HYPER:
            p.add_argument(f"--{name.replace('_', '-')}", type=float)

    p = common(sub.add_parser("fit", help="fit a weight surface"))
    model_args(p)

    p = common(sub.add_parser("cv", help="grid-search hyperparameters"))
    model_args(p)
    p.add_argument("--validation-year", type=int)
    p.add_argument("--grid", help="comma-separated values used for every hyperparameter")
    p.add_argument("--n-jobs", type=int)

    p = common(sub.add_parser("forecast", help="rolling day-ahead forecast"))
    p.add_argument("--surface")
    p.add_argument("--year", type=int)

    p = common(sub.add_parser("evaluate", help="score a forecast"), data=False)
    p.add_argument("--forecast")
    p.add_argument("--actual")
    p.add_argument("--format", choices=["auto", "long", "wide"])
    p.add_argument("--benchmark")
    p.add_argument("--benchmark-format", choices=["auto", "long", "wide"])
    p.add_argument("--year", type=int)
    p.add_argument("--dof", type=float)
    p.add_argument("--residuals")

    p = common(sub.add_parser("aggregate", help="average forecasts"), data=False, cal=False)
    p.add_argument("--forecasts", nargs="+")

    p = common(sub.add_parser("scenario", help="full train/validate/test run"))
    p.add_argument("--train-year", type=int)
    p.add_argument("--benchmark")
    p.add_argument("--kinds", nargs="+")
    p.add_argument("--n-jobs", type=int)

    p = common(sub.add_parser("synth", help="generate synthetic loads"), data=False, cal=False)
    p.add_argument("--n-days", type=int)
    p.add_argument("--start")
    p.add_argument("--seed", type=int)
    p.add_argument("--noise-sd", type=float)
    p.add_argument("--a-true", help="CSV file with the ground-truth surface")
    return parser


def _merge(args) -> dict:
    opts = {}
    if getattr(args, "config", None):
        try:
            opts.update(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {args.config}: {exc}") from None
    for key, value in vars(args).items():
        if value is not None and key not in ("config", "command", "verbose"):
            opts[key] = value
    return opts


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        COMMANDS[args.command](_merge(args))
    except LoadcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

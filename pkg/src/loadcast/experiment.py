"""Hyperparameter search, scenario runs and synthetic load generation.

A scenario follows the rolling-year design: hyperparameters are tuned by
fitting on ``train_year`` and scoring quarter-hourly MAPE on
``validation_year``; the tuned models are then refitted on the year just
before ``test_year`` (the validation year) and scored on ``test_year``.
"""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .calendar import SpecialDayCalendar, date_of, day_serial, load_easter_table
from .errors import (
    ConfigurationError,
    SingularSystemError,
    ValidationError,
)
from .estimators import HYPERPARAMETERS, EstimatorKind, WeightSurface, fit, persistence_surface
from .evaluation import (
    aggregate_forecasts,
    metrics_report,
    predicted_mse_pair,
    quarter_metrics,
    residual_stats,
    residuals,
)
from .forecast import forecast_series, rolling_forecast
from .series import QUARTERS, LoadSeries, build_training_pairs, ingest_csv, preprocess

__all__ = [
    "DEFAULT_GRID",
    "Scenario",
    "GridPoint",
    "CVResult",
    "grid_search",
    "fit_year",
    "run_scenario",
    "SyntheticSpec",
    "synth_generate",
    "gaussian_correlation",
]

DEFAULT_GRID = (0.01, 0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0)
TIE_TOL = 1e-12


# -- cross-validation -----------------------------------------------------------


@dataclass
class GridPoint:
    index: int
    hyperparameters: dict
    validation_mape: float
    dof: float | None
    error: str | None = None


@dataclass
class CVResult:
    kind: str
    train_year: object
    validation_year: int
    points: list
    selected: int

    @property
    def best(self) -> GridPoint:
        return self.points[self.selected]

    def as_dict(self) -> dict:
        d = asdict(self)
        d["selected_hyperparameters"] = self.best.hyperparameters
        return d


def expand_grid(kind, grid=None) -> list[dict]:
    """Cartesian product of per-parameter value lists for ``kind``.

    ``grid`` maps parameter name to values; missing names use
    :data:`DEFAULT_GRID`. A plain sequence is applied to every parameter.
    """
    kind = EstimatorKind.parse(kind)
    names = HYPERPARAMETERS[kind]
    if not names:
        return [{}]
    if grid is None:
        grid = {}
    elif not isinstance(grid, dict):
        grid = {name: list(grid) for name in names}
    axes = []
    for name in names:
        values = list(grid.get(name, DEFAULT_GRID))
        if not values:
            raise ValidationError(f"empty grid for {kind.value}.{name}")
        axes.append([float(v) for v in values])
    return [dict(zip(names, combo)) for combo in itertools.product(*axes)]


def _validation_mape(surface, load, cal, year):
    fc = rolling_forecast(surface, load, cal, year)
    pred = forecast_series(fc)
    days = [d for d in pred.days if d in load]
    return quarter_metrics(load, pred, days)[0]


def grid_search(load: LoadSeries, cal: SpecialDayCalendar, kind, train_year: int,
                validation_year: int | None = None, grid=None, n_jobs: int = 1,
                fixed=None) -> CVResult:
    """Tune ``kind`` by validation-year MAPE.

    Ties (within 1e-12) go to the grid point with the larger total penalty.
    Grid points whose fit is singular are recorded with infinite MAPE.

    Parameters
    ----------
    train_year : int or (first, last)
        Training year, or an inclusive range of target days.
    fixed : dict, optional
        Extra non-tuned arguments passed to every fit (e.g. RBF ``sigma``).
    """
    kind = EstimatorKind.parse(kind)
    if validation_year is None:
        if not isinstance(train_year, (int, np.integer)):
            raise ConfigurationError("validation_year is required for a custom training window")
        validation_year = train_year + 1
    points = expand_grid(kind, grid)
    train = build_training_pairs(preprocess(load, cal), train_year)
    fixed = dict(fixed or {})

    def evaluate(item):
        index, hyper = item
        try:
            surface = fit(kind, train, **hyper, **fixed)
            mape = _validation_mape(surface, load, cal, validation_year)
            return GridPoint(index, hyper, mape, surface.dof)
        except SingularSystemError as exc:
            return GridPoint(index, hyper, math.inf, None, str(exc))

    items = list(enumerate(points))
    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(evaluate, items))
    else:
        results = [evaluate(item) for item in items]
    results.sort(key=lambda p: p.index)
    finite = [p for p in results if math.isfinite(p.validation_mape)]
    if not finite:
        raise SingularSystemError(f"every {kind.value} grid point failed to fit")
    best_mape = min(p.validation_mape for p in finite)
    tied = [p for p in finite if p.validation_mape - best_mape <= TIE_TOL]
    chosen = max(tied, key=lambda p: (sum(p.hyperparameters.values()), -p.index))
    return CVResult(kind.value, train_year, int(validation_year), results, chosen.index)


def fit_year(load, cal, kind, year, **hyper) -> WeightSurface:
    train = build_training_pairs(preprocess(load, cal), int(year))
    return fit(kind, train, **hyper)


# -- scenarios ----------------------------------------------------------------


@dataclass
class Scenario:
    """One train/validate/test configuration.

    ``pinned`` maps a kind to fixed hyperparameters, which skips its grid
    search. ``grids`` maps a kind to ``{parameter: values}``.
    """

    train_year: int
    validation_year: int | None = None
    test_year: int | None = None
    kinds: list = field(default_factory=lambda: ["OLS", "TA", "TS", "RBF", "TE", "OnE"])
    grids: dict = field(default_factory=dict)
    pinned: dict = field(default_factory=dict)
    load_csv: str | None = None
    load_format: str = "auto"
    benchmark_csv: str | None = None
    benchmark_format: str = "auto"
    benchmark_name: str = "benchmark"
    compare_benchmark: bool = False
    aggregate: bool = True
    easter_table: str | None = None
    n_jobs: int = 1

    def __post_init__(self):
        if self.validation_year is None:
            self.validation_year = self.train_year + 1
        if self.test_year is None:
            self.test_year = self.validation_year + 1
        if self.validation_year != self.train_year + 1 or self.test_year != self.validation_year + 1:
            raise ConfigurationError(
                "scenario years must be consecutive: train, train+1 (validation), train+2 (test)"
            )
        self.kinds = [EstimatorKind.parse(k).value for k in self.kinds]

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown scenario fields: {sorted(unknown)}")
        if "train_year" not in data:
            raise ConfigurationError("scenario needs train_year")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "Scenario":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read scenario config {path}: {exc}") from None
        return cls.from_dict(data)

    def calendar(self) -> SpecialDayCalendar:
        return SpecialDayCalendar(easter_table=load_easter_table(self.easter_table))


def run_scenario(scenario: Scenario, load: LoadSeries | None = None,
                 benchmark: LoadSeries | None = None,
                 cal: SpecialDayCalendar | None = None) -> dict:
    """Tune, refit and score every requested estimator on the test year.

    Returns a JSON-ready dict with per-model metrics and dof, the grid
    searches, and, when a benchmark forecast is supplied, percentage changes
    against it, the averaged forecasts ``Avg(model)`` (model and benchmark)
    and the predicted-vs-realized MSE of each average.

    Raises
    ------
    ConfigurationError
        If a benchmark comparison is requested but no benchmark is available.
    """
    cal = scenario.calendar() if cal is None else cal
    if load is None:
        if scenario.load_csv is None:
            raise ConfigurationError("scenario has no load data")
        load = ingest_csv(scenario.load_csv, scenario.load_format)
    if benchmark is None and scenario.benchmark_csv is not None:
        path = Path(scenario.benchmark_csv)
        if not path.exists():
            raise ConfigurationError(f"benchmark file {path} not found")
        benchmark = _read_benchmark(path, scenario.benchmark_format)
    if scenario.compare_benchmark and benchmark is None:
        raise ConfigurationError("benchmark comparison requested but no benchmark forecast given")

    report = {"scenario": asdict(scenario), "cv": {}, "models": {}}
    surfaces = {"PERSISTENCE": persistence_surface(QUARTERS)}
    for kind_name in scenario.kinds:
        kind = EstimatorKind.parse(kind_name)
        if kind_name in scenario.pinned or not HYPERPARAMETERS[kind]:
            hyper = dict(scenario.pinned.get(kind_name, {}))
        else:
            cv = grid_search(load, cal, kind, scenario.train_year, scenario.validation_year,
                             scenario.grids.get(kind_name), n_jobs=scenario.n_jobs)
            report["cv"][kind_name] = cv.as_dict()
            hyper = dict(cv.best.hyperparameters)
        surfaces[kind_name] = fit_year(load, cal, kind, scenario.validation_year, **hyper)

    forecasts = {
        name: forecast_series(rolling_forecast(s, load, cal, scenario.test_year))
        for name, s in surfaces.items()
    }
    common = set(forecasts["PERSISTENCE"].days)
    for fc in forecasts.values():
        common &= set(fc.days)
    common &= set(load.days)
    if benchmark is not None:
        common &= set(benchmark.days)
    days = sorted(common)
    if not days:
        raise ValidationError(f"no common evaluation days in {scenario.test_year}")
    report["evaluation_days"] = len(days)

    bench_metrics = None
    if benchmark is not None:
        bench_metrics = metrics_report(load, benchmark, days)
        report["benchmark"] = {"name": scenario.benchmark_name, "metrics": bench_metrics.as_dict()}

    for name, fc in forecasts.items():
        m = metrics_report(load, fc, days, dof=surfaces[name].dof)
        entry = {"hyperparameters": surfaces[name].params, "metrics": m.as_dict(), "dof": m.dof}
        if bench_metrics is not None:
            entry["relative_to_benchmark_pct"] = m.relative_to(bench_metrics)
        report["models"][name] = entry

    if benchmark is not None and scenario.aggregate:
        bench_sub = benchmark.subset(days)
        e_bench = residuals(load, bench_sub, days)
        report["aggregation"] = {}
        report["mse_decomposition"] = {}
        for name in scenario.kinds:
            model_sub = forecasts[name].subset(days)
            avg = aggregate_forecasts([model_sub, bench_sub])
            m = metrics_report(load, avg, days)
            report["aggregation"][f"Avg({name})"] = {
                "metrics": m.as_dict(),
                "relative_to_benchmark_pct": m.relative_to(bench_metrics),
            }
            e_model = residuals(load, model_sub, days)
            stats = residual_stats(e_model, e_bench)
            bench_stats = residual_stats(e_bench)
            pred = predicted_mse_pair(stats, bench_stats)
            realized = residual_stats(residuals(load, avg, days)).mse
            report["mse_decomposition"][name] = {
                "cov_gw2": stats.cov,
                "rho": stats.rho,
                "bias_model_gw": stats.bias,
                "bias_benchmark_gw": bench_stats.bias,
                "mse_model_gw2": stats.mse,
                "mse_benchmark_gw2": bench_stats.mse,
                "predicted_avg_mse_gw2": pred.predicted_mse,
                "realized_avg_mse_gw2": realized,
                "predicted_improvement": pred.improves,
            }
    return report


def _read_benchmark(path, fmt):
    from .forecast import read_forecast_csv

    with Path(path).open() as fh:
        header = fh.readline().strip().lower()
    if header.startswith("date,q,"):
        return read_forecast_csv(path)
    return ingest_csv(path, fmt)


# -- synthetic data ------------------------------------------------------------


def gaussian_correlation(q: int, length_scale: float) -> np.ndarray:
    """Correlation ``exp(-(k - l)^2 / (2 ell^2))`` between quarter-hours."""
    k = np.arange(q, dtype=float)
    return np.exp(-((k[:, None] - k[None, :]) ** 2) / (2.0 * length_scale**2))


def _matrix_sqrt(K):
    w, V = np.linalg.eigh(K)
    return V * np.sqrt(np.clip(w, 0.0, None))


@dataclass
class SyntheticSpec:
    """Recipe for a synthetic quarter-hourly load series.

    The log-load is a weekly-periodic profile plus a stationary disturbance.
    Without ``a_true`` the disturbance is AR(1) across days (coefficient
    ``ar_coef``) with innovations correlated across quarter-hours by a
    Gaussian kernel of ``length_scale`` quarters, blended with a fraction
    ``nugget`` of independent noise so every quarter carries its own
    variation (a pure Gaussian kernel is numerically low-rank, which would
    make unregularized fits unidentifiable). With ``a_true`` the 7-day
    differenced log-load itself follows ``Y(d) = a_true Y(d-1) + innovation``.
    ``noise_sd`` is the innovation standard deviation.
    """

    n_days: int
    start: str = "2015-01-01"
    q: int = QUARTERS
    base_level_mw: float = 30000.0
    daily_amplitude: float = 0.2
    weekly_amplitude: float = 0.1
    noise_sd: float = 0.01
    ar_coef: float = 0.5
    length_scale: float = 8.0
    nugget: float = 0.05
    a_true: np.ndarray | None = None
    special_distortion: bool = False
    distortion: float = -0.15
    seed: int = 0
    burn_in: int = 200

    def __post_init__(self):
        if self.n_days < 1 or self.q < 1:
            raise ValidationError("synthetic spec needs n_days >= 1 and q >= 1")
        if self.noise_sd < 0 or self.base_level_mw <= 0 or self.length_scale <= 0:
            raise ValidationError("noise_sd >= 0, base_level_mw > 0, length_scale > 0 required")
        if not 0.0 <= self.nugget <= 1.0:
            raise ValidationError("nugget must lie in [0, 1]")
        if self.a_true is not None:
            self.a_true = np.asarray(self.a_true, dtype=float)
            if self.a_true.shape != (self.q, self.q):
                raise ValidationError(f"a_true must be {self.q}x{self.q}")
            radius = float(np.max(np.abs(np.linalg.eigvals(self.a_true))))
            if radius >= 1.0:
                raise ValidationError(f"a_true has spectral radius {radius:.4g} >= 1 (unstable)")

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticSpec":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown synthetic spec fields: {sorted(unknown)}")
        return cls(**data)


def weekly_profile(spec: SyntheticSpec, days: np.ndarray) -> np.ndarray:
    """Deterministic log-load ``p(d, q)``, periodic in ``d`` with period 7."""
    q = np.arange(spec.q)
    shape = -spec.daily_amplitude * np.cos(2.0 * np.pi * (q + 0.5) / spec.q)
    # Monday..Sunday offsets: weekends lower
    offsets = spec.weekly_amplitude * np.array([0.0, 0.05, 0.05, 0.05, 0.0, -0.6, -1.0])
    weekday = np.array([date_of(d).weekday() for d in days])
    evening = 0.3 * spec.weekly_amplitude * np.sin(2.0 * np.pi * q / spec.q)
    return (math.log(spec.base_level_mw) + shape[None, :] + offsets[weekday][:, None]
            + np.where(weekday >= 5, 1.0, 0.0)[:, None] * evening[None, :])


def synth_generate(spec: SyntheticSpec, cal: SpecialDayCalendar | None = None):
    """Generate a load series from ``spec``.

    Returns
    -------
    load : LoadSeries
    a_true : ndarray or None
        The ground-truth surface, when ``spec.a_true`` is set.
    """
    rng = np.random.default_rng(spec.seed)
    first = day_serial(spec.start)
    days = np.arange(first, first + spec.n_days, dtype=np.int64)
    K = (1.0 - spec.nugget) * gaussian_correlation(spec.q, spec.length_scale)
    root = _matrix_sqrt(K + spec.nugget * np.eye(spec.q))

    def innovation():
        return spec.noise_sd * (root @ rng.standard_normal(spec.q))

    eta = np.zeros((spec.n_days, spec.q))
    if spec.a_true is None:
        state = np.zeros(spec.q)
        for _ in range(spec.burn_in):
            state = spec.ar_coef * state + innovation()
        for k in range(spec.n_days):
            state = spec.ar_coef * state + innovation()
            eta[k] = state
    else:
        y = np.zeros(spec.q)
        for _ in range(spec.burn_in):
            y = spec.a_true @ y + innovation()
        for k in range(7, spec.n_days):
            y = spec.a_true @ y + innovation()
            eta[k] = eta[k - 7] + y
    S = weekly_profile(spec, days) + eta
    if spec.special_distortion:
        cal = SpecialDayCalendar.default() if cal is None else cal
        special = np.array([bool(cal.reasons(int(d))) for d in days])
        S[special] += spec.distortion
    with np.errstate(over="ignore"):
        L = np.exp(S)
    if not np.all(np.isfinite(L)) or np.any(L <= 0):
        raise ValidationError("synthetic spec implies non-positive or overflowing loads")
    return LoadSeries(days, L), (None if spec.a_true is None else spec.a_true.copy())

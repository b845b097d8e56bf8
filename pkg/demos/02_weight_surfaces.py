"""
Six ways to estimate the weight surface
=======================================

Fits every estimator on the same year of synthetic data whose true surface
has a diagonal and a last-column edge, then compares effective degrees of
freedom, distance from the truth and next-year forecast error.
"""

import numpy as np

from loadcast import SpecialDayCalendar, SyntheticSpec, synth_generate
from loadcast.evaluation import quarter_metrics
from loadcast.experiment import grid_search
from loadcast.estimators import fit
from loadcast.forecast import forecast_series, rolling_forecast
from loadcast.series import build_training_pairs, preprocess

q = 96
t = np.arange(q) / (q - 1)
A_true = np.diag(0.5 + 0.05 * np.cos(np.pi * t))
A_true[:-1, -1] = 0.2 + 0.25 * t[:-1] ** 3

cal = SpecialDayCalendar.empty()
load, _ = synth_generate(SyntheticSpec(n_days=3 * 365 + 1, start="2015-01-01",
                                       a_true=A_true, nugget=1.0, seed=2))
train = build_training_pairs(preprocess(load, cal), 2015)
print(f"{len(train)} training pairs from 2015\n")

print(f"{'model':6s} {'hyperparameters':40s} {'dof':>9s} {'max|A-A*|':>10s} {'MAPE 2017':>10s}")
for kind in ["OLS", "TA", "TS", "RBF", "TE", "OnE"]:
    # tune on 2016, then score the 2015 fit on 2017
    best = grid_search(load, cal, kind, 2015).best.hyperparameters
    surface = fit(kind, train, **best)
    pred = forecast_series(rolling_forecast(surface, load, cal, 2017))
    mape = quarter_metrics(load, pred, pred.days)[0]
    err = np.max(np.abs(surface.to_dense() - A_true))
    params = ", ".join(f"{k}={v:g}" for k, v in best.items()) or "-"
    print(f"{kind:6s} {params:40s} {surface.dof:9.2f} {err:10.3f} {mape:9.3f}%")

# The two-edge model only stores 191 numbers; its edges are directly readable.
te = fit("TE", train, **grid_search(load, cal, "TE", 2015).best.hyperparameters)
print("\nTE diagonal at q=1, 48, 96:", np.round(te.diag[[0, 47, 95]], 3))
print("TE last column at q=1, 48, 95:", np.round(te.last[[0, 47, 94]], 3))

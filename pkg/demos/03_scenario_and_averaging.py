"""
A full scenario and forecast averaging
======================================

Runs a train/validate/test scenario against an external benchmark forecast
and checks whether averaging each model with the benchmark should help,
using only residual moments.
"""

import numpy as np

from loadcast import SpecialDayCalendar, SyntheticSpec, synth_generate
from loadcast.experiment import Scenario, run_scenario
from loadcast.series import LoadSeries

cal = SpecialDayCalendar.default()
load, _ = synth_generate(SyntheticSpec(n_days=4 * 365 + 1, start="2015-01-01", seed=5))

# Stand-in for a vendor forecast: the truth plus 2% noise that is
# independent of our models' errors.
rng = np.random.default_rng(0)
bench = LoadSeries(load.days, load.values * (1 + 0.02 * rng.standard_normal(load.values.shape)))

scenario = Scenario(train_year=2016, kinds=["TA", "TE", "OnE"],
                    grids={"TA": [1, 100, 10000], "OnE": [1, 100, 10000],
                           "TE": {"lam_diag": [1, 100, 10000], "lam_last": [1, 100, 10000]}})
report = run_scenario(scenario, load, bench, cal)

print(f"test year {scenario.test_year}, {report['evaluation_days']} evaluation days\n")
print(f"{'model':12s} {'MAPE %':>8s} {'RMSE GW':>8s} {'dof':>8s}")
m = report["benchmark"]["metrics"]
print(f"{'benchmark':12s} {m['mape_pct']:8.3f} {m['rmse_gw']:8.3f} {'':>8s}")
for name, entry in report["models"].items():
    m = entry["metrics"]
    print(f"{name:12s} {m['mape_pct']:8.3f} {m['rmse_gw']:8.3f} {entry['dof']:8.1f}")
for name, entry in report["aggregation"].items():
    m = entry["metrics"]
    print(f"{name:12s} {m['mape_pct']:8.3f} {m['rmse_gw']:8.3f}")

print("\npredicted vs realized MSE of each average (GW^2)")
for name, d in report["mse_decomposition"].items():
    print(f"  {name:4s} rho={d['rho']:+.2f}  predicted {d['predicted_avg_mse_gw2']:.4f}"
          f"  realized {d['realized_avg_mse_gw2']:.4f}  helps: {d['predicted_improvement']}")

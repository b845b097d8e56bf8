"""
Special days and the weekly-differenced log-load
================================================

Builds the default holiday calendar, generates two years of synthetic load
and walks through the preprocessing that feeds every estimator.
"""

import numpy as np

from loadcast import SpecialDayCalendar, SyntheticSpec, synth_generate
from loadcast.calendar import SpecialReason, date_of, special_day_set, test_day_set
from loadcast.series import build_training_pairs, preprocess

cal = SpecialDayCalendar.default()

# How many days of 2018 are special, and which ones are Easter?
special = special_day_set("2018-01-01", "2018-12-31", cal)
print(f"2018: {len(special)} special days, {len(test_day_set(2018, cal))} evaluation days")
easter = sorted(d for d in special if cal.is_special(d) is SpecialReason.EASTER)
print("Easter window:", date_of(easter[0]), "to", date_of(easter[-1]))

# Synthetic loads whose holidays sit 15% below the usual weekly pattern.
load, _ = synth_generate(SyntheticSpec(n_days=2 * 365, start="2017-01-01", seed=1,
                                       special_distortion=True))
print(f"\n{len(load)} days of load, mean {load.values.mean() / 1000:.1f} GW")

# Log, difference at lag 7, then mask any day touched by a special day.
Y = preprocess(load, cal)
print(f"differenced series: {len(Y)} days, {int(Y.missing.sum())} masked")
print(f"std of the unmasked differences: {np.nanstd(Y.values):.4f}")

# Training pairs (Y(d-1), Y(d)) need both days unmasked.
train = build_training_pairs(Y, 2017)
print(f"2017 training pairs: {len(train)}")

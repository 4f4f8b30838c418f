"""Extrapolation API: completing partial vectors, predicting ahead,
and what-if prediction under activated failure modes.

The physics backend replays the plant equations, so a window from the
simulator extrapolates to the simulator's own next sample, and blocking
a valve in the session propagates through the predicted flows.
"""

import numpy as np

import twinkit as tk

sc = tk.Scenario(config="4_tanks", duration=600.0, seed=7, backend="physics")
twin = tk.DigitalTwin.from_scenario(sc)
twin.store = tk.run(sc)
twin.fit_backend()

samples = twin.store.samples()
window = samples[300:320]

# One-step-ahead prediction reproduces the plant exactly.
pred = twin.extrapolate_dynamic(window, sc.dt)
actual = samples[320].x
print("one-step prediction error:", float(np.max(np.abs(pred.x - actual))))

# Partial vector completion: give the levels, ask for the flows.
x_partial = np.full(len(twin.schema), np.nan)
for name in ("t0_level", "t1_level", "t2_level", "t3_level"):
    i = twin.schema.index_of(name)
    x_partial[i] = actual[i]
filled = twin.extrapolate_static(x_partial)
print("completed flows:", np.round(filled.x[:7], 5), "confidence:", filled.p[:7])

# What-if: block the inlet valve and predict the same window again.
session = twin.session()
session.set_failed_comps({"v0": "blocked"})
what_if = session.extrapolate_dynamic(window, sc.dt)
i_v0 = twin.schema.index_of("v0_flow")
print(f"v0 flow predicted with v0 blocked: {what_if.x[i_v0]:g}")
print(f"t0 level drops: {actual[twin.schema.index_of('t0_level')]:.4f} -> "
      f"{what_if.x[twin.schema.index_of('t0_level')]:.4f}")

# The default session is untouched by the what-if session.
unchanged = twin.extrapolate_dynamic(window, sc.dt)
assert np.allclose(unchanged.x, pred.x, equal_nan=True)
print("sessions are isolated: default prediction unchanged")

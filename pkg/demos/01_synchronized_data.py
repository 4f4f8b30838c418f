"""Synchronized data API: one timeline, point queries, CSV round-trips.

Runs the four-tank process for ten minutes, then reads individual
signals and whole vectors at arbitrary instants.  Between samples the
store interpolates linearly; outside the recorded range it refuses.
"""

import numpy as np

import twinkit as tk

sc = tk.Scenario(config="4_tanks", duration=600.0, seed=42)
twin = tk.DigitalTwin.from_scenario(sc)
twin.store = tk.run(sc)

t0, t1 = twin.time_range()
print(f"recorded range: [{t0:g}, {t1:g}] s, {len(twin.store)} samples")
print(f"signals: {twin.schema.names}")

# Point query: one signal, then the full vector at the same instant.
i = twin.schema.index_of("t3_level")
print(f"t3 level at t=300:   {twin.get_signal(i, 300.0):.6f} m")
print(f"full vector at t=300: {np.round(twin.get_data(300.0), 5)}")

# Between samples the value is the linear blend of the two neighbors.
print(f"t3 level at t=300.5: {twin.get_signal(i, 300.5):.6f} m (interpolated)")

# Persistence round-trips bitwise: 17 significant digits per value.
twin.store.save_csv("/tmp/demo_run.csv")
again = tk.DataStore.load_csv("/tmp/demo_run.csv")
assert np.array_equal(again.matrix(), twin.store.matrix())
print("CSV round-trip: bit-identical")

try:
    twin.get_data(1e6)
except tk.TwinError as e:
    print(f"query outside the range is refused: {e}")

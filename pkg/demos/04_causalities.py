"""Causality API: halfspace events, convex concepts, guarded transitions,
and the consistency monitor that turns their violations into symptoms.

Concepts and events are plain linear inequalities over the signal
space, written in text.  The generated tank model declares a "normal
band" concept per signal and a band-sustain causality per tank; blocking
the inlet valve makes t0 leave its band, which the monitor flags with
the causality's OK set as suspects.
"""

import numpy as np

import twinkit as tk
from twinkit.causality import load_model_text
from twinkit.tankmodels import fault_free_steady, model_text, signal_bands

# A twin with an injected inlet blockage at t=300.
sc = tk.Scenario(
    config="4_tanks", duration=600.0, seed=5,
    faults=(tk.Fault("v0", "valveBlock", onset=300.0),),
)
twin = tk.DigitalTwin.from_scenario(sc)
twin.store = tk.run(sc)

# Hand-defined event and concept, straight from inequality text.
eid = twin.define_event_text("t0_level > 0.5", name="t0_above_half")
cid = twin.define_concept_text(["0.2 < t0_level < 1.2"], name="t0_mid_band")

x_before = twin.get_data(200.0)
x_after = twin.get_data(340.0)
print("events crossed 200s -> 340s:", twin.get_event(x_before, x_after))
print("concepts holding at 200s:", [twin.causal.concepts[c].name for c in twin.get_concepts(x_before)])
print("concepts holding at 340s:", [twin.causal.concepts[c].name for c in twin.get_concepts(x_after)])

# Load the generated band model into the same twin and watch the run.
topo, steady = fault_free_steady("4_tanks")
loaded = load_model_text(model_text(topo, signal_bands(topo, steady)), twin.schema)
model = loaded.model

first_flag = None
for t in np.arange(1.0, 600.0):
    report = tk.check_state_consistency(twin.store, model, float(t))
    if report.mismatches:
        first_flag = report
        break

assert first_flag is not None
entry = first_flag.mismatches[0]
print(f"first violated causality at t={first_flag.t:g}: {entry.name}")
print(f"suspect components: {sorted(first_flag.suspect_components())}")

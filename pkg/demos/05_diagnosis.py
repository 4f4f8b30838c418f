"""Consistency-based diagnosis: from symptoms to minimal suspect sets.

Weak fault models constrain the plant only while components are OK, so
diagnosis retracts OK assumptions until the observations stop being
contradictory.  The generated tank rules isolate each injected single
fault in a minimal-cardinality diagnosis.
"""

import twinkit as tk
from twinkit.causality import load_model_text
from twinkit.diagnosis import diagnose, observations_from_data, parse_rules_text
from twinkit.tankmodels import fault_free_steady, model_text, rules_text, signal_bands

topo, steady = fault_free_steady("4_tanks")
bands = signal_bands(topo, steady)
rules = parse_rules_text(rules_text(topo))
comps = [c.id for c in topo.components()]
sigma = tuple(
    0.01 * abs(v)
    for v in [steady.flows[v.id] for v in topo.valves]
    + [steady.levels[t.id] for t in topo.tanks]
)

print("rules:")
for line in rules_text(topo).strip().splitlines()[1:]:
    print("  " + line)

CASES = {
    "none (stable)": None,
    "v0 blocked": tk.Fault("v0", "valveBlock", 600.0),
    "t2 leaking": tk.Fault("t2", "tankLeak", 600.0, 0.02),
    "v3 jammed": tk.Fault("v3", "pipeJam", 600.0, 0.5),
}

for label, fault in CASES.items():
    sc = tk.Scenario(
        config="4_tanks", duration=900.0, seed=99, noise_sigma=sigma,
        faults=(fault,) if fault else (),
    )
    store = tk.run(sc)
    loaded = load_model_text(model_text(topo, bands), store.schema)
    obs = observations_from_data(store, loaded.model, loaded.bindings, 880.0)
    result = diagnose(rules, obs, comps)
    pretty = " or ".join("{" + ", ".join(sorted(d)) + "}" for d in result)
    print(f"injected {label:<14} -> minimal diagnoses: {pretty or '{}'}")

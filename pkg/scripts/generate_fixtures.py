"""Regenerate the shipped fixtures under scenarios/.

Writes per-config scenario JSONs (train run, stable test run, one test
run per catalogued fault), the generated diagnosis model/rules files,
and the planning demo steps.  Noise is 1 percent of each signal's
fault-free steady magnitude, materialized into the files so they are
self-contained.  Rerunning is idempotent byte for byte.
"""

from __future__ import annotations

from pathlib import Path

from twinkit.simulator import CONFIGS, Fault, Scenario, save_scenario
from twinkit.tankmodels import (
    fault_free_steady,
    model_text,
    rules_text,
    signal_bands,
    steady_noise_sigma,
)

OUT = Path(__file__).resolve().parent.parent / "scenarios"

TRAIN_DURATION = 600.0
TEST_DURATION = 900.0
ONSET = 600.0

#: Fault catalogue per configuration: label -> Fault.
CATALOGUE: dict[str, dict[str, Fault]] = {
    "a_tank": {
        "pumpSlow": Fault("pump", "pumpSlow", ONSET, 0.6),
        "tank1_leak": Fault("t1", "tankLeak", ONSET, 0.03),
        "valve0Block": Fault("v0", "valveBlock", ONSET),
        "valve1Block": Fault("v1", "valveBlock", ONSET),
        "valve1Stuck": Fault("v1", "valveStuck", ONSET, 0.3),
    },
    "3_tanks": {
        "pumpFast": Fault("pump", "pumpFast", ONSET, 1.5),
        "pumpSlow": Fault("pump", "pumpSlow", ONSET, 0.6),
        "tank1_leak": Fault("t1", "tankLeak", ONSET, 0.03),
        "tank2_leak": Fault("t2", "tankLeak", ONSET, 0.03),
        "valve2_closed": Fault("v2", "valveStuck", ONSET, 0.0),
        "valve3_closed": Fault("v3", "valveStuck", ONSET, 0.0),
    },
    "4_tanks": {
        "pipe4_jam": Fault("v4", "pipeJam", ONSET, 0.7),
        "tank2_leak": Fault("t2", "tankLeak", ONSET, 0.03),
        "valve3_jam": Fault("v3", "pipeJam", ONSET, 0.5),
        "valve6_jam": Fault("v6", "pipeJam", ONSET, 0.6),
        "valve0_block": Fault("v0", "valveBlock", ONSET),
    },
}

SEED_BASE = {"a_tank": 11000, "3_tanks": 12000, "4_tanks": 13000}

PLAN_STEPS = """\
# planning demo: machining chain with a scrap branch
object raw
object blank
object part
object polished_part
object scrap
step cut : raw => blank ok saw
step drill : blank => part ok drill_press
step polish : part => polished_part ok polisher
step recycle : scrap => raw ok shredder
"""


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    for config in CONFIGS:
        topo, steady = fault_free_steady(config)
        sigma = steady_noise_sigma(topo, steady)
        base = SEED_BASE[config]
        save_scenario(
            Scenario(config=config, duration=TRAIN_DURATION, seed=base + 1,
                     noise_sigma=sigma, name=f"{config}_train"),
            OUT / f"{config}_train.json",
        )
        save_scenario(
            Scenario(config=config, duration=TEST_DURATION, seed=base + 2,
                     noise_sigma=sigma, name=f"{config}_stable"),
            OUT / f"{config}_stable.json",
        )
        for i, (label, fault) in enumerate(sorted(CATALOGUE[config].items())):
            save_scenario(
                Scenario(config=config, duration=TEST_DURATION, seed=base + 10 + i,
                         noise_sigma=sigma, faults=(fault,), name=f"{config}_{label}"),
                OUT / f"{config}_{label}.json",
            )
        bands = signal_bands(topo, steady)
        (OUT / f"{config}.model").write_text(model_text(topo, bands), encoding="utf-8")
        (OUT / f"{config}.rules").write_text(rules_text(topo), encoding="utf-8")
    (OUT / "demo_steps.model").write_text(PLAN_STEPS, encoding="utf-8")
    print(f"fixtures written to {OUT}")


if __name__ == "__main__":
    main()

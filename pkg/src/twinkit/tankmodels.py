"""Symbolic models generated from a tank-plant topology.

The fault-free steady state pins a "normal" band around every signal:
flow bands are the steady flow +/- a relative width, and each tank's
level band is the exact preimage of its drain-valve flow band under the
discharge law q = u*k*sqrt(h).  That makes "level in band" and "drain
flow in band" equivalent statements about a healthy plant at any moment,
transient or steady.

Three artifacts derive from the bands:

* band concepts plus predicate bindings (the diagnosis observations),
* per-tank band-sustain causalities (the consistency monitor),
* guarded rules in two tiers: *static* rules encode the discharge-law
  equivalence and the constant source flow, and hold at every instant of
  a healthy run; *equilibrium* rules state that normal inflows imply a
  normal level, which holds once the plant has settled and is what lets
  diagnosis walk the chain at a steady checkpoint.

Everything is emitted in the text formats the loaders understand, so the
same fixture files drive the library and the command line.
"""

from __future__ import annotations

from .data_model import FLOAT_FMT
from .diagnosis import GuardedRule, parse_rules_text
from .simulator import Scenario, SimState, Topology, run_full, topology_for


def fault_free_steady(config: str, duration: float = 600.0, dt: float = 1.0) -> tuple[Topology, SimState]:
    """Final state of a noise-free fault-free run; the band anchor."""
    sc = Scenario(config=config, dt=dt, duration=duration, seed=0, noise_sigma=0.0)
    result = run_full(sc)
    return result.topology, result.states[-1]


def steady_noise_sigma(topo: Topology, steady: SimState, fraction: float = 0.01) -> tuple[float, ...]:
    """Per-signal measurement noise: ``fraction`` of the steady magnitude."""
    values = [steady.flows[v.id] for v in topo.valves] + [steady.levels[t.id] for t in topo.tanks]
    return tuple(fraction * abs(v) for v in values)


def signal_bands(topo: Topology, steady: SimState, width: float = 0.1) -> dict[str, tuple[float, float]]:
    """Per-signal normal band.

    Flows: steady value +/- ``width``.  Levels: the sqrt discharge law
    maps the drain flow band back to ``(h*(1-width)^2, h*(1+width)^2)``,
    so the two bands select each other exactly.
    """
    bands: dict[str, tuple[float, float]] = {}
    for v in topo.valves:
        q = steady.flows[v.id]
        bands[f"{v.id}_flow"] = (q * (1.0 - width), q * (1.0 + width))
    for t in topo.tanks:
        h = steady.levels[t.id]
        bands[f"{t.id}_level"] = (h * (1.0 - width) ** 2, h * (1.0 + width) ** 2)
    return bands


def _tank_guard(topo: Topology, tid: str) -> list[str]:
    guard = [tid]
    for v in topo.valves_into(tid) + topo.valves_out_of(tid):
        guard.append(v.id)
        if v.src == "source":
            guard.append(topo.pump_id)
    return sorted(set(guard))


def model_text(topo: Topology, bands: dict[str, tuple[float, float]]) -> str:
    """Band concepts, predicate bindings and band-sustain causalities."""
    lines = ["# generated tank model: band concepts, bindings, sustain causalities"]
    for sig, (lo, hi) in bands.items():
        lines.append(f"concept {sig}_band : {FLOAT_FMT % lo} < {sig} < {FLOAT_FMT % hi}")
        lines.append(f"bind {sig}_normal : {sig}_band")
    for t in topo.tanks:
        guard = ", ".join(_tank_guard(topo, t.id))
        lines.append(
            f"causality {t.id}_band_sustain : {t.id}_level_band -> {t.id}_level_band ok {guard}"
        )
    return "\n".join(lines) + "\n"


def static_rules_text(topo: Topology) -> str:
    """Rules that hold at every instant of a fault-free run.

    The source valve delivers its commanded flow from t=0, and the
    discharge law ties each tank-fed valve's flow band to its feeding
    tank's level band in both directions.
    """
    lines = ["# static tier: discharge-law equivalences and the source flow"]
    for v in topo.valves:
        if v.src == "source":
            lines.append(f"OK({topo.pump_id})&OK({v.id}) -> => {v.id}_flow_normal")
        else:
            lines.append(f"OK({v.id}) -> {v.src}_level_normal => {v.id}_flow_normal")
            lines.append(f"OK({v.id}) -> {v.id}_flow_normal => {v.src}_level_normal")
    return "\n".join(lines) + "\n"


def equilibrium_rules_text(topo: Topology) -> str:
    """Rules valid once the plant has settled: normal inflows imply a
    normal level while the tank and its drain valves are OK."""
    lines = ["# equilibrium tier: inflow balance at steady state"]
    for t in topo.tanks:
        in_preds = " & ".join(f"{v.id}_flow_normal" for v in topo.valves_into(t.id))
        guard = "&".join(
            f"OK({c})" for c in [t.id] + sorted(v.id for v in topo.valves_out_of(t.id))
        )
        lines.append(f"{guard} -> {in_preds} => {t.id}_level_normal")
    return "\n".join(lines) + "\n"


def rules_text(topo: Topology) -> str:
    """Combined rule file used by diagnosis at steady checkpoints."""
    return static_rules_text(topo) + equilibrium_rules_text(topo)


def tank_rules(topo: Topology) -> list[GuardedRule]:
    return parse_rules_text(rules_text(topo), origin="tank-rules")


def static_tank_rules(topo: Topology) -> list[GuardedRule]:
    return parse_rules_text(static_rules_text(topo), origin="tank-static-rules")


def generate_config_model(config: str, width: float = 0.1) -> tuple[str, str]:
    """(model file text, rules file text) for a built-in configuration."""
    topo, steady = fault_free_steady(config)
    bands = signal_bands(topo, steady, width)
    return model_text(topo, bands), rules_text(topo)


__all__ = [
    "fault_free_steady",
    "steady_noise_sigma",
    "signal_bands",
    "model_text",
    "static_rules_text",
    "equilibrium_rules_text",
    "rules_text",
    "tank_rules",
    "static_tank_rules",
    "generate_config_model",
    "topology_for",
]

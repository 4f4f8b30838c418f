"""Deterministic discrete-time simulation of the multi-tank water process.

Three built-in plant configurations (``a_tank``, ``3_tanks``, ``4_tanks``)
share the same dynamics: a pump pushes water from an unlimited source
through electric valves into tanks, tank-fed valves discharge with a
sqrt-of-head law, and levels integrate with explicit Euler steps.

Faults (blocked/stuck/jammed valves, leaking tanks, slow/fast pumps) are
injected at a configurable onset and change the flow laws from that
instant on.  Measurement noise is applied to the *emitted* samples only,
never to the internal state, and every run is bit-reproducible from its
seed.

Mass is conserved exactly per step: tank outflows are limited by the
volume actually available during the step (so levels never go negative)
and overflow beyond ``h_max`` is removed as recorded spill.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .components import Component
from .data_model import DataStore, Sample, SignalSchema
from .errors import InvalidScenario, ParseError

#: Scenario fault tokens -> session failure-mode names.
FAULT_MODES = {
    "valveBlock": ("valve", "blocked"),
    "valveStuck": ("valve", "stuck"),
    "pipeJam": ("valve", "jam"),
    "tankLeak": ("tank", "leak"),
    "pumpSlow": ("pump", "slow"),
    "pumpFast": ("pump", "fast"),
}

CONFIGS = ("a_tank", "3_tanks", "4_tanks")


@dataclass(frozen=True)
class Tank:
    id: str
    area: float = 1.0   # m^2
    h_max: float = 2.0  # m


@dataclass(frozen=True)
class Valve:
    """Directed pipe with an electric valve and an integrated flow sensor.

    ``src`` is a tank id or "source"; ``dst`` is a tank id or "sink".
    Source-fed valves deliver ``source_flow * u``; tank-fed valves deliver
    ``u * k * sqrt(h_src)``.
    """

    id: str
    src: str
    dst: str
    k: float = 1.0
    u: float = 1.0


@dataclass(frozen=True)
class Topology:
    tanks: tuple[Tank, ...]
    valves: tuple[Valve, ...]
    source_flow: float
    pump_id: str = "pump"

    def __post_init__(self):
        tank_ids = {t.id for t in self.tanks}
        if len(tank_ids) != len(self.tanks):
            raise InvalidScenario("duplicate tank ids")
        for t in self.tanks:
            if t.area <= 0 or t.h_max <= 0:
                raise InvalidScenario(f"tank {t.id}: area and h_max must be > 0")
        seen = set(tank_ids)
        for v in self.valves:
            if v.id in seen:
                raise InvalidScenario(f"duplicate component id {v.id}")
            seen.add(v.id)
            if v.src != "source" and v.src not in tank_ids:
                raise InvalidScenario(f"valve {v.id}: unknown source {v.src!r}")
            if v.dst != "sink" and v.dst not in tank_ids:
                raise InvalidScenario(f"valve {v.id}: unknown destination {v.dst!r}")
            if v.k <= 0:
                raise InvalidScenario(f"valve {v.id}: k must be > 0")
            if not 0.0 <= v.u <= 1.0:
                raise InvalidScenario(f"valve {v.id}: opening must be in [0, 1]")
        if self.source_flow <= 0:
            raise InvalidScenario("source_flow must be > 0")
        object.__setattr__(self, "_order", self._topological_order())

    def _topological_order(self) -> tuple[str, ...]:
        # Kahn's algorithm over tank->tank valve edges; limiting outflows
        # needs upstream inflows resolved first, so cycles are rejected.
        tank_ids = [t.id for t in self.tanks]
        indeg = {tid: 0 for tid in tank_ids}
        out_edges: dict[str, list[str]] = {tid: [] for tid in tank_ids}
        for v in self.valves:
            if v.src in indeg and v.dst in indeg:
                out_edges[v.src].append(v.dst)
                indeg[v.dst] += 1
        ready = [tid for tid in tank_ids if indeg[tid] == 0]
        order: list[str] = []
        while ready:
            tid = ready.pop(0)
            order.append(tid)
            for nxt in out_edges[tid]:
                indeg[nxt] -= 1
                if indeg[nxt] == 0:
                    ready.append(nxt)
        if len(order) != len(tank_ids):
            raise InvalidScenario("tank graph has a cycle")
        return tuple(order)

    @property
    def order(self) -> tuple[str, ...]:
        return self._order  # type: ignore[attr-defined]

    def tank(self, tid: str) -> Tank:
        for t in self.tanks:
            if t.id == tid:
                return t
        raise InvalidScenario(f"unknown tank {tid!r}")

    def valves_into(self, tid: str) -> list[Valve]:
        return [v for v in self.valves if v.dst == tid]

    def valves_out_of(self, tid: str) -> list[Valve]:
        return [v for v in self.valves if v.src == tid]

    def components(self) -> list[Component]:
        comps = [Component(self.pump_id, "pump")]
        comps += [Component(v.id, "valve") for v in self.valves]
        comps += [Component(t.id, "tank") for t in self.tanks]
        return comps

    def schema(self) -> SignalSchema:
        names = [f"{v.id}_flow" for v in self.valves] + [f"{t.id}_level" for t in self.tanks]
        units = ["m3/s"] * len(self.valves) + ["m"] * len(self.tanks)
        return SignalSchema.from_names(names, units)


def topology_for(config: str) -> Topology:
    """Built-in plant wiring for the three shipped configurations."""
    if config == "a_tank":
        return Topology(
            tanks=(Tank("t1"),),
            valves=(Valve("v0", "source", "t1"), Valve("v1", "t1", "sink", k=0.06)),
            source_flow=0.06,
        )
    if config == "3_tanks":
        return Topology(
            tanks=(Tank("t1"), Tank("t2"), Tank("t3")),
            valves=(
                Valve("v0", "source", "t1"),
                Valve("v1", "t1", "t2", k=0.06),
                Valve("v2", "t2", "t3", k=0.06),
                Valve("v3", "t3", "sink", k=0.05),
            ),
            source_flow=0.06,
        )
    if config == "4_tanks":
        # One source valve into t0, three equal pipes out of t0, the two
        # side tanks rejoin t3, one drain valve to the sink.
        return Topology(
            tanks=(Tank("t0"), Tank("t1"), Tank("t2"), Tank("t3")),
            valves=(
                Valve("v0", "source", "t0"),
                Valve("v1", "t0", "t1", k=0.02),
                Valve("v2", "t0", "t2", k=0.02),
                Valve("v3", "t0", "t3", k=0.02),
                Valve("v4", "t1", "t3", k=0.02),
                Valve("v5", "t2", "t3", k=0.02),
                Valve("v6", "t3", "sink", k=0.05),
            ),
            source_flow=0.06,
        )
    raise InvalidScenario(f"unknown config {config!r}; expected one of {CONFIGS}")


@dataclass(frozen=True)
class Fault:
    """One injected component fault.

    ``magnitude`` is the stuck opening (valveStuck), coefficient scale
    (pipeJam), leak coefficient (tankLeak) or pump speed factor
    (pumpSlow/pumpFast); it is ignored for valveBlock.  A stuck valve
    with no magnitude freezes at its commanded opening.
    """

    component: str
    mode: str
    onset: float = 0.0
    magnitude: float | None = None

    def __post_init__(self):
        if self.mode not in FAULT_MODES:
            raise InvalidScenario(f"unknown fault mode {self.mode!r}")
        if not math.isfinite(self.onset) or self.onset < 0:
            raise InvalidScenario(f"fault onset must be >= 0, got {self.onset}")
        if self.mode in ("pipeJam", "tankLeak", "pumpSlow", "pumpFast"):
            if self.magnitude is None or self.magnitude < 0:
                raise InvalidScenario(f"{self.mode} needs a magnitude >= 0")
        if self.mode == "pumpSlow" and self.magnitude is not None and self.magnitude >= 1.0:
            raise InvalidScenario("pumpSlow magnitude must be < 1")
        if self.mode == "pumpFast" and self.magnitude is not None and self.magnitude <= 1.0:
            raise InvalidScenario("pumpFast magnitude must be > 1")


@dataclass(frozen=True)
class Scenario:
    """Reproducible data source: topology choice, faults, sampling plan."""

    config: str
    dt: float = 1.0
    duration: float = 600.0
    seed: int = 0
    noise_sigma: float | tuple[float, ...] = 0.0
    faults: tuple[Fault, ...] = ()
    backend: str = "knn-kde"
    name: str = ""

    def __post_init__(self):
        if self.config not in CONFIGS:
            raise InvalidScenario(f"unknown config {self.config!r}")
        if not self.dt > 0:
            raise InvalidScenario("dt must be > 0")
        if self.duration < self.dt:
            raise InvalidScenario("duration must be >= dt")
        comps = set()
        for f in self.faults:
            if f.component in comps:
                raise InvalidScenario(f"duplicate fault on component {f.component}")
            comps.add(f.component)
        object.__setattr__(self, "faults", tuple(self.faults))

    @property
    def n_samples(self) -> int:
        return int(round(self.duration / self.dt))

    def noise_vector(self, n_signals: int) -> np.ndarray:
        sig = self.noise_sigma
        if isinstance(sig, (int, float)):
            arr = np.full(n_signals, float(sig))
        else:
            arr = np.asarray(sig, dtype=float)
            if arr.shape != (n_signals,):
                raise InvalidScenario(
                    f"noise_sigma needs {n_signals} entries, got {arr.shape}"
                )
        if (arr < 0).any() or not np.isfinite(arr).all():
            raise InvalidScenario("noise_sigma entries must be finite and >= 0")
        return arr


def load_scenario(path) -> Scenario:
    """Parse a scenario JSON file; reports the line of malformed input."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: {e.msg}", line=e.lineno) from None
    return scenario_from_dict(raw, origin=str(path))


def scenario_from_dict(raw: dict, origin: str = "scenario") -> Scenario:
    if not isinstance(raw, dict):
        raise ParseError(f"{origin}: scenario must be a JSON object", line=1)
    try:
        faults = tuple(
            Fault(
                component=f["component"],
                mode=f["mode"],
                onset=float(f.get("onset", 0.0)),
                magnitude=None if f.get("magnitude") is None else float(f["magnitude"]),
            )
            for f in raw.get("faults", [])
        )
        sigma = raw.get("noise_sigma", 0.0)
        if isinstance(sigma, list):
            sigma = tuple(float(s) for s in sigma)
        return Scenario(
            config=raw["config"],
            dt=float(raw.get("dt", 1.0)),
            duration=float(raw.get("duration", 600.0)),
            seed=int(raw.get("seed", 0)),
            noise_sigma=sigma,
            faults=faults,
            backend=raw.get("backend", "knn-kde"),
            name=raw.get("name", ""),
        )
    except KeyError as e:
        raise ParseError(f"{origin}: missing scenario field {e.args[0]!r}", line=1) from None
    except (TypeError, ValueError) as e:
        raise ParseError(f"{origin}: {e}", line=1) from None


def scenario_to_dict(sc: Scenario) -> dict:
    sigma = sc.noise_sigma
    if isinstance(sigma, tuple):
        sigma = list(sigma)
    return {
        "name": sc.name,
        "config": sc.config,
        "dt": sc.dt,
        "duration": sc.duration,
        "seed": sc.seed,
        "noise_sigma": sigma,
        "backend": sc.backend,
        "faults": [
            {"component": f.component, "mode": f.mode, "onset": f.onset, "magnitude": f.magnitude}
            for f in sc.faults
        ],
    }


def save_scenario(sc: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(sc), fh, indent=2)
        fh.write("\n")


# --- dynamics ---

@dataclass(frozen=True)
class SimState:
    """Levels plus the flows the plant sustains at this instant.

    Flows are the availability-limited discharges computed from the
    levels and the faults active at time ``t``; they are what the flow
    sensors read and what drives the next Euler step.
    """

    t: float
    levels: dict[str, float]
    flows: dict[str, float]
    leaks: dict[str, float]


def active_faults(faults: tuple[Fault, ...], topo: Topology, t: float) -> dict[str, tuple[str, float]]:
    """Faults in force at time t as component -> (mode, magnitude)."""
    active: dict[str, tuple[str, float]] = {}
    for f in faults:
        if t < f.onset:
            continue
        kind, mode = FAULT_MODES[f.mode]
        mag = f.magnitude
        if mode == "stuck" and mag is None:
            mag = _valve(topo, f.component).u  # freeze at commanded opening
        active[f.component] = (mode, 0.0 if mag is None else float(mag))
    return active


def _valve(topo: Topology, vid: str) -> Valve:
    for v in topo.valves:
        if v.id == vid:
            return v
    raise InvalidScenario(f"fault references unknown valve {vid!r}")


def validate_faults(sc: Scenario, topo: Topology) -> None:
    kinds = {topo.pump_id: "pump"}
    kinds.update({v.id: "valve" for v in topo.valves})
    kinds.update({t.id: "tank" for t in topo.tanks})
    for f in sc.faults:
        kind = kinds.get(f.component)
        if kind is None:
            raise InvalidScenario(f"fault on unknown component {f.component!r}")
        want_kind, _ = FAULT_MODES[f.mode]
        if kind != want_kind:
            raise InvalidScenario(
                f"fault mode {f.mode} applies to {want_kind}s, {f.component} is a {kind}"
            )


def compute_flows(
    levels: dict[str, float],
    topo: Topology,
    active: dict[str, tuple[str, float]],
    dt: float,
) -> tuple[dict[str, float], dict[str, float]]:
    """Per-valve flows and per-tank leak flows for one step.

    Demanded flows follow the valve laws; each tank's outflows are then
    scaled down so the discharged volume never exceeds the stored volume
    plus the step's inflow.  Tanks are processed in topological order so
    inflows are final before outflows are limited.
    """
    pump_factor = 1.0
    if topo.pump_id in active:
        mode, mag = active[topo.pump_id]
        if mode in ("slow", "fast"):
            pump_factor = mag

    def valve_params(v: Valve) -> tuple[float, float, bool]:
        u, k, blocked = v.u, v.k, False
        if v.id in active:
            mode, mag = active[v.id]
            if mode == "blocked":
                blocked = True
            elif mode == "stuck":
                u = mag
            elif mode == "jam":
                k = v.k * mag
        return u, k, blocked

    flows: dict[str, float] = {}
    for v in topo.valves:
        if v.src == "source":
            u, _, blocked = valve_params(v)
            flows[v.id] = 0.0 if blocked else topo.source_flow * u * pump_factor

    leaks: dict[str, float] = {t.id: 0.0 for t in topo.tanks}
    for tid in topo.order:
        tank = topo.tank(tid)
        h = levels[tid]
        inflow = sum(flows[v.id] for v in topo.valves_into(tid))
        head = math.sqrt(max(h, 0.0))
        demands: list[tuple[str, float]] = []
        for v in topo.valves_out_of(tid):
            u, k, blocked = valve_params(v)
            demands.append((v.id, 0.0 if blocked else u * k * head))
        leak_demand = 0.0
        if tid in active and active[tid][0] == "leak":
            leak_demand = active[tid][1] * head
        demand_vol = dt * (sum(q for _, q in demands) + leak_demand)
        avail_vol = tank.area * h + dt * inflow
        scale = 1.0 if demand_vol <= avail_vol else avail_vol / demand_vol
        for vid, q in demands:
            flows[vid] = q * scale
        leaks[tid] = leak_demand * scale
    return flows, leaks


def make_state(
    t: float,
    levels: dict[str, float],
    topo: Topology,
    active: dict[str, tuple[str, float]],
    dt: float,
) -> SimState:
    flows, leaks = compute_flows(levels, topo, active, dt)
    return SimState(t=t, levels=dict(levels), flows=flows, leaks=leaks)


def step_once(
    state: SimState,
    topo: Topology,
    active_next: dict[str, tuple[str, float]],
    dt: float,
) -> tuple[SimState, dict[str, float]]:
    """One explicit Euler step; returns the next state and spilled volume.

    Levels update with the state's flows; overflow above ``h_max`` is
    removed and reported per tank (in m^3).  Outflow limiting inside
    ``compute_flows`` guarantees levels never go negative, so the
    discrete mass balance ``sum(A*dh) = dt*(in - out - leak) - spill``
    holds to rounding error.  ``active_next`` is the fault map in force
    at the new instant; it shapes the next state's flows.
    """
    new_levels: dict[str, float] = {}
    spill: dict[str, float] = {}
    for tank in topo.tanks:
        tid = tank.id
        inflow = sum(state.flows[v.id] for v in topo.valves_into(tid))
        outflow = sum(state.flows[v.id] for v in topo.valves_out_of(tid))
        h_raw = state.levels[tid] + dt * (inflow - outflow - state.leaks[tid]) / tank.area
        h_raw = max(h_raw, 0.0)  # guards float rounding; limiter keeps it >= 0
        over = max(h_raw - tank.h_max, 0.0)
        spill[tid] = over * tank.area
        new_levels[tid] = h_raw - over
    t_next = state.t + dt
    return make_state(t_next, new_levels, topo, active_next, dt), spill


def advance(
    state: SimState,
    topo: Topology,
    faults: tuple[Fault, ...],
    dt: float,
) -> tuple[SimState, dict[str, float]]:
    """Step once under the scenario's fault schedule."""
    return step_once(state, topo, active_faults(faults, topo, state.t + dt), dt)


def signal_vector(state: SimState, topo: Topology) -> np.ndarray:
    """Emitted sample in schema order: valve flows then tank levels."""
    return np.array(
        [state.flows[v.id] for v in topo.valves] + [state.levels[t.id] for t in topo.tanks]
    )


@dataclass
class ScenarioBuild:
    """Everything a twin needs registered before data starts flowing."""

    topology: Topology
    components: list[Component]
    schema: SignalSchema


def build_scenario(sc: Scenario) -> ScenarioBuild:
    topo = topology_for(sc.config)
    validate_faults(sc, topo)
    return ScenarioBuild(topology=topo, components=topo.components(), schema=topo.schema())


@dataclass
class RunResult:
    scenario: Scenario
    topology: Topology
    store: DataStore
    labels: list[tuple[float, int, str]]
    states: list[SimState]
    spills: list[dict[str, float]]


def run_full(sc: Scenario) -> RunResult:
    """Simulate the scenario and emit one noisy sample per time step.

    Samples land at t = 0, dt, 2*dt, ... (``n_samples`` of them).  Noise
    is drawn from a generator seeded with ``sc.seed``, so identical
    scenarios produce bit-identical stores.
    """
    build = build_scenario(sc)
    topo = build.topology
    schema = build.schema
    sigma = sc.noise_vector(len(schema))
    rng = np.random.default_rng(sc.seed)
    with_noise = bool((sigma > 0).any())

    onset = min((f.onset for f in sc.faults), default=math.inf)

    levels0 = {t.id: 0.0 for t in topo.tanks}
    state = make_state(0.0, levels0, topo, active_faults(sc.faults, topo, 0.0), sc.dt)
    states = [state]
    spills: list[dict[str, float]] = []
    store = DataStore(schema)
    labels: list[tuple[float, int, str]] = []

    for k in range(sc.n_samples):
        if k > 0:
            state, spill = advance(states[-1], topo, sc.faults, sc.dt)
            states.append(state)
            spills.append(spill)
        x = signal_vector(state, topo)
        if with_noise:
            x = x + rng.normal(0.0, 1.0, size=len(schema)) * sigma
        store.ingest(Sample(state.t, x))
        anomalous = state.t >= onset
        label = "stable"
        if anomalous:
            first = min((f for f in sc.faults if state.t >= f.onset), key=lambda f: f.onset)
            label = first.mode
        labels.append((state.t, int(anomalous), label))
    return RunResult(sc, topo, store, labels, states, spills)


def run(sc: Scenario) -> DataStore:
    """Scenario -> synchronized sample store (see :func:`run_full`)."""
    return run_full(sc).store


def save_labels(labels: list[tuple[float, int, str]], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,is_anomalous,label\n")
        for t, flag, label in labels:
            fh.write(f"{t:.17g},{flag},{label}\n")


def load_labels(path) -> list[tuple[float, int, str]]:
    out: list[tuple[float, int, str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "t,is_anomalous,label":
            raise ParseError(f"{path}: bad labels header {header!r}", line=1)
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ParseError(f"{path}: expected 3 fields", line=lineno)
            out.append((float(parts[0]), int(parts[1]), parts[2]))
    return out

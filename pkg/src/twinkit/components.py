"""Plant components and failure-mode assignments.

A component is anything that can fail: valves, tanks, pumps.  Each kind
declares the failure modes a twin session may activate; "OK" is always a
member and is never an *active* failure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import UnknownComponent, UnknownMode

KIND_MODES = {
    "valve": frozenset({"OK", "blocked", "stuck", "jam"}),
    "tank": frozenset({"OK", "leak"}),
    "pipe": frozenset({"OK", "jam"}),
    "pump": frozenset({"OK", "slow", "fast"}),
    "sensor": frozenset({"OK"}),
}

#: Magnitude used by the physics backend when a session activates a mode
#: without an explicit override (stuck position, coefficient scale, leak
#: coefficient, pump speed factor).
DEFAULT_MAGNITUDE = {
    "blocked": 0.0,
    "stuck": 0.0,
    "jam": 0.5,
    "leak": 0.01,
    "slow": 0.5,
    "fast": 1.5,
}


@dataclass(frozen=True)
class Component:
    """A failable plant element with its declared failure modes."""

    id: str
    kind: str
    modes: frozenset = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.kind not in KIND_MODES:
            raise UnknownMode(f"unknown component kind {self.kind!r}")
        modes = self.modes if self.modes is not None else KIND_MODES[self.kind]
        modes = frozenset(modes) | {"OK"}
        object.__setattr__(self, "modes", modes)


def validate_failure_assignment(components: dict[str, Component], failed: dict[str, str]) -> dict[str, str]:
    """Check a component-id -> failure-mode map against the registry.

    Every id must be registered, every mode declared for that component,
    and "OK" never appears as an assigned value (an OK component is
    simply absent from the map).
    """
    out = {}
    for cid, mode in failed.items():
        comp = components.get(cid)
        if comp is None:
            raise UnknownComponent(f"component {cid!r} is not registered")
        if mode == "OK":
            raise UnknownMode(f"{cid}: 'OK' is not an active failure mode")
        if mode not in comp.modes:
            raise UnknownMode(f"{cid}: mode {mode!r} not in {sorted(comp.modes)}")
        out[cid] = mode
    return out

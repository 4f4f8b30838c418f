"""Process planning over product-rewrite steps.

A process step consumes a multiset of input objects and produces a
multiset of output objects; a plan is the shortest step sequence turning
an initial multiset into one containing the goal.  Steps guarded by
components that are not available are unusable.  Event triggers on steps
are ignored during planning (treated as always fireable); they matter
only for runtime monitoring.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .errors import InputsUnavailable, NoPlanFound, ParseError, SizeLimitExceeded

#: BFS state cap; beyond this the instance is rejected rather than churned.
MAX_VISITED = 200_000


@dataclass(frozen=True)
class ProductMultiset:
    """Immutable object-id -> count map; zero counts are never stored."""

    counts: tuple[tuple[str, int], ...]

    def __init__(self, counts: dict[str, int] | tuple = ()):
        if isinstance(counts, tuple):
            counts = dict(counts)
        cleaned = {}
        for pid, c in counts.items():
            if c < 0:
                raise InputsUnavailable(f"negative count for {pid!r}")
            if c > 0:
                cleaned[pid] = int(c)
        object.__setattr__(self, "counts", tuple(sorted(cleaned.items())))

    def as_dict(self) -> dict[str, int]:
        return dict(self.counts)

    def __bool__(self) -> bool:
        return bool(self.counts)

    def __len__(self) -> int:
        return sum(c for _, c in self.counts)

    def contains(self, other: "ProductMultiset") -> bool:
        mine = self.as_dict()
        return all(mine.get(pid, 0) >= c for pid, c in other.counts)

    def plus(self, other: "ProductMultiset") -> "ProductMultiset":
        out = self.as_dict()
        for pid, c in other.counts:
            out[pid] = out.get(pid, 0) + c
        return ProductMultiset(out)

    def minus(self, other: "ProductMultiset") -> "ProductMultiset":
        out = self.as_dict()
        for pid, c in other.counts:
            have = out.get(pid, 0)
            if have < c:
                raise InputsUnavailable(f"need {c} x {pid}, have {have}")
            out[pid] = have - c
        return ProductMultiset(out)

    def ids(self) -> list[str]:
        return [pid for pid, _ in self.counts]

    def __str__(self) -> str:
        return " + ".join(f"{pid}:{c}" if c != 1 else pid for pid, c in self.counts) or "(empty)"


def parse_multiset(text: str) -> ProductMultiset:
    """Parse ``id[:count] + id[:count] + ...``; blank means empty."""
    text = text.strip()
    if not text or text == "(empty)":
        return ProductMultiset({})
    counts: dict[str, int] = {}
    for part in text.split("+"):
        part = part.strip()
        if not part:
            raise ParseError(f"empty multiset term in {text!r}")
        if ":" in part:
            pid, _, num = part.partition(":")
            pid = pid.strip()
            try:
                c = int(num.strip())
            except ValueError:
                raise ParseError(f"bad count in multiset term {part!r}") from None
        else:
            pid, c = part, 1
        if not pid:
            raise ParseError(f"missing object id in multiset term {part!r}")
        if c <= 0:
            raise ParseError(f"multiset counts must be positive: {part!r}")
        counts[pid] = counts.get(pid, 0) + c
    return ProductMultiset(counts)


@dataclass(frozen=True)
class Plan:
    """Ordered step ids, applicable in sequence from the initial state."""

    steps: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.steps)


def apply_step(state: ProductMultiset, step) -> ProductMultiset:
    """Consume the step's inputs and add its outputs.

    ``step`` is any object with ``p1``/``p2`` multiset attributes (a
    product causality).  Raises :class:`InputsUnavailable` when the
    inputs are not contained in the state.
    """
    if not state.contains(step.p1):
        raise InputsUnavailable(
            f"step {getattr(step, 'id', '?')}: inputs {step.p1} not in state {state}"
        )
    return state.minus(step.p1).plus(step.p2)


def plan(
    steps,
    initial: ProductMultiset,
    goal: ProductMultiset,
    available: set[str] | None = None,
    max_depth: int = 10,
) -> Plan:
    """Shortest step sequence whose final state contains the goal.

    Breadth-first over multiset states with steps expanded in
    lexicographic id order, so ties resolve to the lexicographically
    first optimal sequence.  Steps whose OK guard is not a subset of
    ``available`` are unusable (``available=None`` means everything is).
    Raises :class:`NoPlanFound` if the goal is unreachable within
    ``max_depth`` steps.
    """
    if max_depth < 1:
        raise NoPlanFound("max_depth must be >= 1")
    usable = [
        s for s in sorted(steps, key=lambda s: s.id)
        if available is None or set(s.ok) <= set(available)
    ]
    if initial.contains(goal):
        return Plan(())
    queue: deque[tuple[ProductMultiset, tuple[str, ...]]] = deque([(initial, ())])
    seen = {initial.counts}
    while queue:
        state, path = queue.popleft()
        if len(path) >= max_depth:
            continue
        for step in usable:
            if not state.contains(step.p1):
                continue
            nxt = state.minus(step.p1).plus(step.p2)
            if nxt.counts in seen:
                continue
            new_path = path + (step.id,)
            if nxt.contains(goal):
                return Plan(new_path)
            seen.add(nxt.counts)
            if len(seen) > MAX_VISITED:
                raise SizeLimitExceeded(f"planning explored more than {MAX_VISITED} states")
            queue.append((nxt, new_path))
    raise NoPlanFound(f"no sequence of <= {max_depth} steps reaches {goal}")

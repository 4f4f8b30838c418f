"""Consistency-based diagnosis over weak fault models.

Behavior is modeled only for correctly functioning components: each rule
``OK(C1) & ... & OK(Ck) -> (s1 & ... -> t1 & ...)`` constrains the world
solely while every guard component is assumed OK.  Retracting an OK
assumption removes the rule, never adds behavior, so supersets of a
consistent suspect set stay consistent.

Consistency is decided by positive forward chaining: the rules of intact
guards are chained from the observations asserted true; the result is
inconsistent exactly when some derived predicate was observed false.
Diagnoses are the consistent suspect sets of minimal cardinality.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

from .errors import DanglingReference, ParseError, SizeLimitExceeded, TimeOutOfRange

#: diagnose() refuses larger component sets; subset enumeration explodes.
MAX_COMPONENTS = 20


@dataclass(frozen=True)
class StatePredicate:
    """A named binary statement about the plant, e.g. a concept holding."""

    id: str
    meaning: str = ""


@dataclass(frozen=True)
class GuardedRule:
    """``OK(guard...) -> (antecedent... -> consequent...)``."""

    ok_guard: frozenset
    antecedent: frozenset
    consequent: frozenset

    def __post_init__(self):
        object.__setattr__(self, "ok_guard", frozenset(self.ok_guard))
        object.__setattr__(self, "antecedent", frozenset(self.antecedent))
        object.__setattr__(self, "consequent", frozenset(self.consequent))
        if not self.consequent:
            raise DanglingReference("a rule needs a non-empty consequent")


@dataclass(frozen=True)
class ObservationSet:
    """Predicates observed true and observed false; the rest is unknown."""

    as_true: frozenset
    as_false: frozenset

    def __post_init__(self):
        object.__setattr__(self, "as_true", frozenset(self.as_true))
        object.__setattr__(self, "as_false", frozenset(self.as_false))
        overlap = self.as_true & self.as_false
        if overlap:
            raise DanglingReference(
                f"predicates observed both true and false: {sorted(overlap)}"
            )


def forward_chain(rules, facts: frozenset) -> frozenset:
    """Fixpoint of the positive rules from the given facts."""
    derived = set(facts)
    changed = True
    while changed:
        changed = False
        for rule in rules:
            if rule.antecedent <= derived and not rule.consequent <= derived:
                derived |= rule.consequent
                changed = True
    return frozenset(derived)


def is_consistent(rules, obs: ObservationSet, failed) -> bool:
    """True when the intact rules derive nothing observed false.

    Rules whose guard intersects ``failed`` are retracted before
    chaining; negative information enters only through ``obs.as_false``.
    """
    failed = frozenset(failed)
    active = [r for r in rules if not (r.ok_guard & failed)]
    derived = forward_chain(active, obs.as_true)
    return not (derived & obs.as_false)


def diagnose(rules, obs: ObservationSet, comps) -> list[frozenset]:
    """All minimal-cardinality suspect sets consistent with the observations.

    Subsets of ``comps`` are enumerated by increasing size; the first
    size with any consistent subset wins and all consistent subsets of
    that size are returned, sorted lexicographically by component id.
    ``[frozenset()]`` means the observations fit an all-OK plant.
    """
    comps = sorted(set(comps))
    _check_guards(rules, comps)
    if len(comps) > MAX_COMPONENTS:
        raise SizeLimitExceeded(
            f"{len(comps)} components exceed the diagnose guard of {MAX_COMPONENTS}"
        )
    for size in range(len(comps) + 1):
        found = [
            frozenset(subset)
            for subset in combinations(comps, size)
            if is_consistent(rules, obs, frozenset(subset))
        ]
        if found:
            return sorted(found, key=lambda d: tuple(sorted(d)))
    # Unreachable for weak fault models: retracting every guard disables
    # every rule, so the full component set is always consistent unless
    # the observations contradict themselves (rejected at construction).
    return []


def _check_guards(rules, comps) -> None:
    known = set(comps)
    for rule in rules:
        unknown = rule.ok_guard - known
        if unknown:
            raise DanglingReference(
                f"rule guard references unknown components {sorted(unknown)}"
            )


def observations_from_data(store, model, bindings: dict[str, str], t: float) -> ObservationSet:
    """Evaluate concept-bound predicates against the data at time t.

    Each predicate is observed true when x(t) lies in its bound concept
    and false otherwise; ``bindings`` maps predicate ids to concept ids.
    """
    lo, hi = store.time_range()
    if not lo - 1e-9 <= t <= hi + 1e-9:
        raise TimeOutOfRange(f"t={t} outside the recorded range [{lo}, {hi}]")
    for pred, cid in bindings.items():
        if cid not in model.concepts:
            raise DanglingReference(f"binding {pred!r} references unknown concept {cid!r}")
    x = store.get_data(t)
    as_true, as_false = set(), set()
    for pred, cid in bindings.items():
        (as_true if model.concept_contains(cid, x) else as_false).add(pred)
    return ObservationSet(frozenset(as_true), frozenset(as_false))


# --- rule file format ---

def parse_rules_text(text: str, origin: str = "<rules>") -> list[GuardedRule]:
    """Parse one rule per line: ``OK(a)&OK(b) -> s1 & s2 => s3 & s4``.

    The guard may be empty (line starts at ``->``) and the antecedent may
    be empty (nothing between ``->`` and ``=>``); ``#`` starts a comment.
    """
    rules: list[GuardedRule] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "->" not in line or "=>" not in line:
            raise ParseError(f"{origin}: rule needs '-> ... =>'", line=lineno)
        guard_part, _, rest = line.partition("->")
        ante_part, _, cons_part = rest.partition("=>")
        guard = set()
        for tok in guard_part.split("&"):
            tok = tok.strip()
            if not tok:
                continue
            if not (tok.startswith("OK(") and tok.endswith(")")):
                raise ParseError(f"{origin}: guard terms look like OK(name), got {tok!r}", line=lineno)
            guard.add(tok[3:-1].strip())
        ante = {s.strip() for s in ante_part.split("&") if s.strip()}
        cons = {s.strip() for s in cons_part.split("&") if s.strip()}
        if not cons:
            raise ParseError(f"{origin}: rule needs a consequent", line=lineno)
        rules.append(GuardedRule(frozenset(guard), frozenset(ante), frozenset(cons)))
    return rules


def parse_rules_file(path) -> list[GuardedRule]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_rules_text(fh.read(), origin=str(path))


def format_rule(rule: GuardedRule) -> str:
    guard = "&".join(f"OK({c})" for c in sorted(rule.ok_guard))
    ante = " & ".join(sorted(rule.antecedent))
    cons = " & ".join(sorted(rule.consequent))
    return f"{guard} -> {ante} => {cons}"

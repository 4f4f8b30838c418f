"""Symbolic layer: halfspace events, convex concepts, guarded causalities.

An event is a halfspace ``f . x < c`` of the signal space; it triggers
when the straight segment between two operation points crosses the
boundary hyperplane (in either direction).  A concept is a named convex
region, the conjunction of strict linear inequalities; boundary points
count as outside.  Causalities are guarded transitions between concepts
(system) or between object multisets (product); each carries the set of
components whose correct functioning it presumes.

Inequalities are written in a plain text grammar::

    term (+ term)* ('<'|'>') number        term = [coeff '*'] signalName
    number < expr < number                 (chained shorthand, two inequalities)

A bare signal name means coefficient 1; a leading ``-`` negates a term.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .data_model import SignalSchema, is_missing
from .errors import (
    DanglingReference,
    EmptyRegion,
    IncompleteVector,
    ParseError,
    UnknownConcept,
    UnknownProduct,
    ZeroCoefficientVector,
)
from .planning import ProductMultiset, parse_multiset


@dataclass(frozen=True)
class LinearInequality:
    """Strict halfspace ``f . x < c`` over the full signal vector."""

    f: np.ndarray
    c: float

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        if f.ndim != 1 or not np.isfinite(f).all() or not np.isfinite(self.c):
            raise ZeroCoefficientVector("coefficients and bound must be finite")
        if not np.any(f != 0.0):
            raise ZeroCoefficientVector("coefficient vector must not be all zero")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "c", float(self.c))

    def margin(self, x) -> float:
        """f . x - c; negative strictly inside the halfspace."""
        return float(np.dot(self.f, x) - self.c)

    def holds(self, x) -> bool:
        return self.margin(x) < 0.0


@dataclass(frozen=True)
class Event:
    id: str
    name: str
    hs: LinearInequality


@dataclass(frozen=True)
class Concept:
    id: str
    name: str
    region: tuple[LinearInequality, ...]

    def contains(self, x) -> bool:
        return all(ineq.holds(x) for ineq in self.region)


@dataclass(frozen=True)
class SystemCausality:
    """Guarded transition s1 -> s2, optionally triggered by an event."""

    id: str
    s1: str
    s2: str
    event: str | None = None
    ok: frozenset = frozenset()
    info: tuple[tuple[str, str], ...] = ()
    name: str = ""


@dataclass(frozen=True)
class ProductCausality:
    """Process step consuming p1 and producing p2, guarded by OK components."""

    id: str
    p1: ProductMultiset
    p2: ProductMultiset
    event: str | None = None
    ok: frozenset = frozenset()
    info: tuple[tuple[str, str], ...] = ()
    name: str = ""


_TERM_RE = re.compile(r"^\s*(-)?\s*(?:([0-9.eE+-]+)\s*\*\s*)?([A-Za-z_][A-Za-z0-9_]*)\s*$")


def _parse_expr(text: str, schema: SignalSchema) -> np.ndarray:
    f = np.zeros(len(schema))
    for raw in text.split("+"):
        m = _TERM_RE.match(raw)
        if not m:
            raise ParseError(f"cannot parse term {raw.strip()!r} in {text.strip()!r}")
        sign = -1.0 if m.group(1) else 1.0
        coeff = float(m.group(2)) if m.group(2) is not None else 1.0
        f[schema.index_of(m.group(3))] += sign * coeff
    return f


def _as_number(text: str) -> float | None:
    try:
        return float(text)
    except ValueError:
        return None


def parse_inequality(text: str, schema: SignalSchema) -> list[LinearInequality]:
    """Parse one inequality string; a chained form yields two halfspaces."""
    parts = re.split(r"([<>])", text)
    rels = [p for p in parts if p in "<>"]
    if len(rels) == 2:
        if rels != ["<", "<"]:
            raise ParseError(f"chained inequalities must use '<': {text.strip()!r}")
        lo, hi = _as_number(parts[0]), _as_number(parts[4])
        if lo is None or hi is None:
            raise ParseError(f"chained bounds must be numbers: {text.strip()!r}")
        f = _parse_expr(parts[2], schema)
        return [LinearInequality(f, hi), LinearInequality(-f, -lo)]
    if len(rels) != 1:
        raise ParseError(f"expected one '<' or '>' in {text.strip()!r}")
    left, rel, right = parts[0], rels[0], parts[2]
    num = _as_number(right)
    if num is not None:
        f = _parse_expr(left, schema)
    else:
        num = _as_number(left)
        if num is None:
            raise ParseError(f"one side must be a number: {text.strip()!r}")
        f = _parse_expr(right, schema)
        rel = "<" if rel == ">" else ">"  # number rel expr mirrors the relation
    if rel == "<":
        return [LinearInequality(f, num)]
    return [LinearInequality(-f, -num)]


class CausalModel:
    """Registry of events, concepts, causalities and product objects.

    Definitions are serialized by construction order; queries are pure
    reads over immutable records.  When a component registry is supplied
    the OK sets of added causalities are checked against it.
    """

    def __init__(self, schema: SignalSchema, known_components: set[str] | None = None):
        self.schema = schema
        self.known_components = known_components
        self.events: dict[str, Event] = {}
        self.concepts: dict[str, Concept] = {}
        self.system_causalities: list[SystemCausality] = []
        self.products: dict[str, None] = {}
        self.product_causalities: list[ProductCausality] = []

    # --- events ---

    def define_event(self, hs: LinearInequality, name: str = "") -> str:
        eid = f"e{len(self.events)}"
        self.events[eid] = Event(eid, name or eid, hs)
        return eid

    def define_event_text(self, text: str, name: str = "") -> str:
        ineqs = parse_inequality(text, self.schema)
        if len(ineqs) != 1:
            raise ParseError(f"an event is a single halfspace, got a chain: {text.strip()!r}")
        return self.define_event(ineqs[0], name)

    def get_event(self, x, x_prime) -> list[str]:
        """Events whose boundary the straight segment x -> x' crosses.

        Crossing means the strict-membership sign differs at the two
        endpoints; a boundary hit counts as outside.  Symmetric in its
        arguments, and empty when x == x'.
        """
        x = self._complete(x)
        xp = self._complete(x_prime)
        out = []
        for eid, ev in self.events.items():
            if ev.hs.holds(x) != ev.hs.holds(xp):
                out.append(eid)
        return out

    # --- concepts ---

    def define_concept(self, region, name: str = "") -> str:
        region = tuple(region)
        if not region:
            raise EmptyRegion("a concept needs at least one inequality")
        cid = f"s{len(self.concepts)}"
        self.concepts[cid] = Concept(cid, name or cid, region)
        return cid

    def define_concept_text(self, texts, name: str = "") -> str:
        region: list[LinearInequality] = []
        for text in texts:
            region.extend(parse_inequality(text, self.schema))
        return self.define_concept(region, name)

    def concept_contains(self, cid: str, x) -> bool:
        concept = self.concepts.get(cid)
        if concept is None:
            raise UnknownConcept(f"unknown concept {cid!r}")
        return concept.contains(self._complete(x))

    def get_concepts(self, x) -> list[str]:
        """Ids of exactly the concepts containing x, in definition order."""
        x = self._complete(x)
        return [cid for cid, c in self.concepts.items() if c.contains(x)]

    def _complete(self, x) -> np.ndarray:
        x = self.schema.validate_vector(x, allow_missing=True)
        if is_missing(x).any():
            raise IncompleteVector("event/concept queries need complete vectors")
        return x

    # --- system causalities ---

    def add_system_causality(
        self,
        s1: str,
        s2: str,
        event: str | None = None,
        ok=(),
        info: dict[str, str] | None = None,
        name: str = "",
    ) -> str:
        for cid in (s1, s2):
            if cid not in self.concepts:
                raise DanglingReference(f"causality references unknown concept {cid!r}")
        if event is not None and event not in self.events:
            raise DanglingReference(f"causality references unknown event {event!r}")
        ok = frozenset(ok)
        self._check_components(ok)
        scid = f"c{len(self.system_causalities)}"
        self.system_causalities.append(
            SystemCausality(scid, s1, s2, event, ok, tuple(sorted((info or {}).items())), name or scid)
        )
        return scid

    def get_system_causalities(self, s: str) -> list[SystemCausality]:
        """All stored causalities starting at concept ``s``."""
        if s not in self.concepts:
            raise UnknownConcept(f"unknown concept {s!r}")
        return [sc for sc in self.system_causalities if sc.s1 == s]

    def list_system_causalities(self) -> list[SystemCausality]:
        return list(self.system_causalities)

    # --- products ---

    def define_product(self, pid: str) -> str:
        self.products.setdefault(pid, None)
        return pid

    def add_product_causality(
        self,
        p1: ProductMultiset,
        p2: ProductMultiset,
        event: str | None = None,
        ok=(),
        info: dict[str, str] | None = None,
        name: str = "",
    ) -> str:
        if not p1:
            raise DanglingReference("a process step needs at least one input object")
        for pid in list(p1.ids()) + list(p2.ids()):
            if pid not in self.products:
                raise DanglingReference(f"step references unknown product {pid!r}")
        if event is not None and event not in self.events:
            raise DanglingReference(f"step references unknown event {event!r}")
        ok = frozenset(ok)
        self._check_components(ok)
        qid = f"q{len(self.product_causalities)}"
        self.product_causalities.append(
            ProductCausality(qid, p1, p2, event, ok, tuple(sorted((info or {}).items())), name or qid)
        )
        return qid

    def get_product_causalities(self, pid: str) -> list[ProductCausality]:
        """Steps consuming ``pid`` (it appears among the inputs)."""
        if pid not in self.products:
            raise UnknownProduct(f"unknown product {pid!r}")
        return [pc for pc in self.product_causalities if pid in pc.p1.ids()]

    def list_product_causalities(self) -> list[ProductCausality]:
        return list(self.product_causalities)

    def _check_components(self, ok: frozenset) -> None:
        if self.known_components is None:
            return
        unknown = ok - self.known_components
        if unknown:
            raise DanglingReference(f"OK guard references unknown components {sorted(unknown)}")


# --- consistency between data and causalities ---

@dataclass(frozen=True)
class ConsistencyEntry:
    """One prediction made by a causality at a checkpoint."""

    t_prev: float
    t: float
    causality: str
    name: str
    expected: str            # concept id predicted to contain x(t)
    triggered_by: str | None
    holds: bool
    actual: tuple[str, ...]  # concepts actually containing x(t)


@dataclass
class ConsistencyReport:
    t: float
    entries: list[ConsistencyEntry] = field(default_factory=list)

    @property
    def mismatches(self) -> list[ConsistencyEntry]:
        return [e for e in self.entries if not e.holds]

    def suspect_components(self) -> set[str]:
        """Union of the OK guards of all violated causalities."""
        out: set[str] = set()
        for e in self.mismatches:
            out |= self._ok_by_id.get(e.causality, frozenset())
        return out

    _ok_by_id: dict = field(default_factory=dict, repr=False)


def check_state_consistency(
    store,
    model: CausalModel,
    t: float,
    failed: set[str] | frozenset = frozenset(),
) -> ConsistencyReport:
    """Compare causality-predicted concepts with the data at time t.

    For every causality whose start concept held at the previous stored
    sample and whose event (if any) triggered on the segment between the
    two samples, the end concept is expected to contain x(t).  Entries
    with ``holds=False`` are symptoms; their OK guards name the suspect
    components.  Causalities guarded by a component in ``failed`` claim
    nothing and are skipped.
    """
    times = store.times()
    report = ConsistencyReport(t=t)
    x_now = store.get_data(t)
    prev_candidates = times[times < t - 1e-9]
    if len(prev_candidates) == 0 or not model.system_causalities:
        return report
    t_prev = float(prev_candidates[-1])
    x_prev = store.get_data(t_prev)
    prev_concepts = set(model.get_concepts(x_prev))
    triggered = set(model.get_event(x_prev, x_now))
    actual = tuple(model.get_concepts(x_now))
    for sc in model.system_causalities:
        if sc.ok & frozenset(failed):
            continue
        if sc.s1 not in prev_concepts:
            continue
        if sc.event is not None and sc.event not in triggered:
            continue
        holds = model.concept_contains(sc.s2, x_now)
        report.entries.append(
            ConsistencyEntry(t_prev, t, sc.id, sc.name, sc.s2, sc.event, holds, actual)
        )
        report._ok_by_id[sc.id] = sc.ok
    return report


# --- model file loading ---

_CLAUSE_RE = re.compile(r"\b(on|ok|meta)\b")


@dataclass
class LoadedModel:
    model: CausalModel
    event_ids: dict[str, str]
    concept_ids: dict[str, str]
    bindings: dict[str, str]  # predicate id -> concept id


def _split_clauses(tail: str) -> tuple[str, dict[str, str]]:
    parts = _CLAUSE_RE.split(tail)
    core = parts[0].strip()
    clauses: dict[str, str] = {}
    for kw, val in zip(parts[1::2], parts[2::2]):
        if kw in clauses:
            raise ParseError(f"duplicate {kw!r} clause")
        clauses[kw] = val.strip()
    return core, clauses


def _parse_meta(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for pair in text.split(","):
        pair = pair.strip()
        if not pair:
            continue
        if "=" not in pair:
            raise ParseError(f"meta entries are key=value, got {pair!r}")
        k, _, v = pair.partition("=")
        out[k.strip()] = v.strip()
    return out


def load_model_text(
    text: str,
    schema: SignalSchema,
    known_components: set[str] | None = None,
    origin: str = "<model>",
) -> LoadedModel:
    """Parse a causal model file (events, concepts, causalities, steps,
    product objects, diagnosis bindings); one record per line.

    Records (``#`` starts a comment)::

        object  <id>
        event   <name> : <inequality>
        concept <name> : <inequality> [; <inequality>]*
        causality <name> : <s1> -> <s2> [on <event>] [ok c1,c2] [meta k=v,...]
        step    <name> : <multiset> => <multiset> [on <event>] [ok ...] [meta ...]
        bind    <predicate> : <concept>
    """
    model = CausalModel(schema, known_components)
    event_ids: dict[str, str] = {}
    concept_ids: dict[str, str] = {}
    bindings: dict[str, str] = {}

    def resolve_event(name: str, lineno: int) -> str:
        if name not in event_ids:
            raise DanglingReference(f"{origin}:{lineno}: unknown event {name!r}")
        return event_ids[name]

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kind, _, rest = line.partition(" ")
        rest = rest.strip()
        try:
            if kind == "object":
                if not rest:
                    raise ParseError("object record needs an id")
                model.define_product(rest)
                continue
            name, sep, tail = rest.partition(":")
            name = name.strip()
            if not sep or not name:
                raise ParseError(f"{kind} record needs '<name> : ...'")
            if kind == "event":
                if name in event_ids:
                    raise ParseError(f"duplicate event name {name!r}")
                event_ids[name] = model.define_event_text(tail.strip(), name)
            elif kind == "concept":
                if name in concept_ids:
                    raise ParseError(f"duplicate concept name {name!r}")
                texts = [p for p in (s.strip() for s in tail.split(";")) if p]
                concept_ids[name] = model.define_concept_text(texts, name)
            elif kind == "causality":
                core, clauses = _split_clauses(tail)
                if "->" not in core:
                    raise ParseError("causality needs '<s1> -> <s2>'")
                a, _, b = core.partition("->")
                a, b = a.strip(), b.strip()
                for ref in (a, b):
                    if ref not in concept_ids:
                        raise DanglingReference(
                            f"{origin}:{lineno}: unknown concept {ref!r}"
                        )
                model.add_system_causality(
                    concept_ids[a],
                    concept_ids[b],
                    event=resolve_event(clauses["on"], lineno) if "on" in clauses else None,
                    ok=[c.strip() for c in clauses.get("ok", "").split(",") if c.strip()],
                    info=_parse_meta(clauses.get("meta", "")),
                    name=name,
                )
            elif kind == "step":
                core, clauses = _split_clauses(tail)
                if "=>" not in core:
                    raise ParseError("step needs '<inputs> => <outputs>'")
                src, _, dst = core.partition("=>")
                model.add_product_causality(
                    parse_multiset(src),
                    parse_multiset(dst),
                    event=resolve_event(clauses["on"], lineno) if "on" in clauses else None,
                    ok=[c.strip() for c in clauses.get("ok", "").split(",") if c.strip()],
                    info=_parse_meta(clauses.get("meta", "")),
                    name=name,
                )
            elif kind == "bind":
                concept = tail.strip()
                if concept not in concept_ids:
                    raise DanglingReference(
                        f"{origin}:{lineno}: unknown concept {concept!r}"
                    )
                bindings[name] = concept_ids[concept]
            else:
                raise ParseError(f"unknown record kind {kind!r}")
        except ParseError as e:
            if e.line is None:
                raise ParseError(f"{origin}: {e}", line=lineno) from None
            raise
    return LoadedModel(model, event_ids, concept_ids, bindings)


def load_model_file(path, schema, known_components=None) -> LoadedModel:
    with open(path, "r", encoding="utf-8") as fh:
        return load_model_text(fh.read(), schema, known_components, origin=str(path))

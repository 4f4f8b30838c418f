"""The digital twin: one object tying data, prediction and causalities.

A twin owns the signal schema, the component registry, the synchronized
sample store and the causal model.  After fitting a predictor backend it
hands out sessions; each session carries its own failure-mode assignment
so concurrent what-if queries cannot interfere.  The twin itself
delegates prediction calls to an internal default session.
"""

from __future__ import annotations

import numpy as np

from .causality import CausalModel, ConsistencyReport, check_state_consistency
from .components import Component
from .data_model import DataStore, Sample, SignalSchema
from .errors import NotFitted, UnknownComponent
from .prediction import PredictionEngine, TwinSession, make_backend
from .simulator import Scenario, Topology, build_scenario


class DigitalTwin:
    def __init__(
        self,
        schema: SignalSchema,
        components: list[Component] = (),
        topology: Topology | None = None,
        backend: str = "knn-kde",
    ):
        self.schema = schema
        self.topology = topology
        self.backend_name = backend
        self.components: dict[str, Component] = {}
        for comp in components:
            if comp.id in self.components:
                raise UnknownComponent(f"duplicate component id {comp.id!r}")
            self.components[comp.id] = comp
        self.store = DataStore(schema)
        self.causal = CausalModel(schema, known_components=set(self.components) or None)
        self._engine: PredictionEngine | None = None
        self._default_session: TwinSession | None = None

    @classmethod
    def from_scenario(cls, sc: Scenario) -> "DigitalTwin":
        build = build_scenario(sc)
        return cls(build.schema, build.components, build.topology, backend=sc.backend)

    # --- components ---

    def get_comps(self) -> list[Component]:
        """All registered components in stable registration order."""
        return list(self.components.values())

    # --- data ---

    def ingest(self, sample: Sample) -> None:
        self.store.ingest(sample)

    def get_data(self, t: float) -> np.ndarray:
        return self.store.get_data(t)

    def get_signal(self, i: int, t: float) -> float:
        return self.store.get_signal(i, t)

    def time_range(self) -> tuple[float, float]:
        return self.store.time_range()

    # --- prediction ---

    def fit_backend(self, history: list[Sample] | None = None, backend: str | None = None) -> None:
        """Fit the named backend on ``history`` (default: the stored samples)."""
        if backend is not None:
            self.backend_name = backend
        if history is None:
            history = self.store.samples()
        engine = PredictionEngine(self.schema, make_backend(self.backend_name, self.topology))
        engine.fit(history)
        self._engine = engine
        self._default_session = TwinSession(engine, self.components)

    @property
    def engine(self) -> PredictionEngine:
        if self._engine is None:
            raise NotFitted("call fit_backend first")
        return self._engine

    def session(self) -> TwinSession:
        """A fresh prediction handle with an empty failure assignment."""
        return TwinSession(self.engine, self.components)

    def _session(self) -> TwinSession:
        if self._default_session is None:
            raise NotFitted("call fit_backend first")
        return self._default_session

    def set_failed_comps(self, failed: dict[str, str], magnitudes=None) -> None:
        self._session().set_failed_comps(failed, magnitudes)

    def extrapolate_static(self, x_partial):
        return self._session().extrapolate_static(x_partial)

    def extrapolate_dynamic(self, window, dt: float):
        return self._session().extrapolate_dynamic(window, dt)

    def anomaly_score_static(self, x) -> float:
        return self._session().anomaly_score_static(x)

    def anomaly_score_dynamic(self, window) -> float:
        return self._session().anomaly_score_dynamic(window)

    # --- causalities ---

    def define_event(self, hs, name: str = "") -> str:
        return self.causal.define_event(hs, name)

    def define_event_text(self, text: str, name: str = "") -> str:
        return self.causal.define_event_text(text, name)

    def get_event(self, x, x_prime) -> list[str]:
        return self.causal.get_event(x, x_prime)

    def define_concept(self, region, name: str = "") -> str:
        return self.causal.define_concept(region, name)

    def define_concept_text(self, texts, name: str = "") -> str:
        return self.causal.define_concept_text(texts, name)

    def get_concepts(self, x) -> list[str]:
        return self.causal.get_concepts(x)

    def add_system_causality(self, s1, s2, event=None, ok=(), info=None, name="") -> str:
        return self.causal.add_system_causality(s1, s2, event, ok, info, name)

    def get_system_causalities(self, s: str):
        return self.causal.get_system_causalities(s)

    def define_product(self, pid: str) -> str:
        return self.causal.define_product(pid)

    def add_product_causality(self, p1, p2, event=None, ok=(), info=None, name="") -> str:
        return self.causal.add_product_causality(p1, p2, event, ok, info, name)

    def get_product_causalities(self, pid: str):
        return self.causal.get_product_causalities(pid)

    def check_state_consistency(
        self, t: float, session: TwinSession | None = None
    ) -> ConsistencyReport:
        """Compare causality predictions with the stored data at time t.

        Causalities guarded by components the session has failed are
        skipped (they claim nothing for a faulty component).
        """
        failed = frozenset()
        if session is not None:
            failed = frozenset(session.failed_comps)
        elif self._default_session is not None:
            failed = frozenset(self._default_session.failed_comps)
        return check_state_consistency(self.store, self.causal, t, failed)

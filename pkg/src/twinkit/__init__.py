"""twinkit: a digital-twin runtime for multi-tank processes.

Three API layers over one twin object: synchronized time-indexed data,
probabilistic extrapolation with activatable failure modes, and symbolic
causalities feeding consistency-based diagnosis and process planning.
A deterministic tank-process simulator provides reproducible data.
"""

from .causality import (
    CausalModel,
    Concept,
    ConsistencyReport,
    Event,
    LinearInequality,
    ProductCausality,
    SystemCausality,
    check_state_consistency,
    load_model_file,
    load_model_text,
    parse_inequality,
)
from .components import Component
from .data_model import DataStore, Sample, SignalSchema, SignalSpec, is_missing
from .diagnosis import (
    GuardedRule,
    ObservationSet,
    StatePredicate,
    diagnose,
    forward_chain,
    is_consistent,
    observations_from_data,
    parse_rules_file,
    parse_rules_text,
)
from .errors import TwinError
from .harness import EvalReport, anomaly_threshold, detect, evaluate_anomaly, rank_auc
from .planning import Plan, ProductMultiset, apply_step, parse_multiset, plan
from .prediction import (
    KnnKdeBackend,
    PhysicsBackend,
    PredictionEngine,
    PredictionResult,
    TwinSession,
    make_backend,
)
from .simulator import (
    Fault,
    RunResult,
    Scenario,
    Topology,
    build_scenario,
    load_scenario,
    run,
    run_full,
    save_scenario,
    topology_for,
)
from .twin import DigitalTwin

__version__ = "0.1.0"

__all__ = [
    "CausalModel",
    "Component",
    "Concept",
    "ConsistencyReport",
    "DataStore",
    "DigitalTwin",
    "EvalReport",
    "Event",
    "Fault",
    "GuardedRule",
    "KnnKdeBackend",
    "LinearInequality",
    "ObservationSet",
    "PhysicsBackend",
    "Plan",
    "PredictionEngine",
    "PredictionResult",
    "ProductCausality",
    "ProductMultiset",
    "RunResult",
    "Sample",
    "Scenario",
    "SignalSchema",
    "SignalSpec",
    "StatePredicate",
    "SystemCausality",
    "Topology",
    "TwinError",
    "TwinSession",
    "anomaly_threshold",
    "apply_step",
    "build_scenario",
    "check_state_consistency",
    "detect",
    "diagnose",
    "evaluate_anomaly",
    "forward_chain",
    "is_consistent",
    "is_missing",
    "load_model_file",
    "load_model_text",
    "load_scenario",
    "make_backend",
    "observations_from_data",
    "parse_inequality",
    "parse_multiset",
    "parse_rules_file",
    "parse_rules_text",
    "plan",
    "rank_auc",
    "run",
    "run_full",
    "save_scenario",
    "topology_for",
]

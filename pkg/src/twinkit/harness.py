"""Command-line orchestration and anomaly-detection evaluation.

Subcommands::

    twinkit simulate <scenario.json> [-o DIR]
    twinkit detect <train.csv> <test.csv> <labels.csv> [--backend NAME]
                   [--config NAME] [-o DIR]
    twinkit diagnose <rules.txt> <run-dir> <bindings.model> [--at T ...]
    twinkit plan <steps.model> --initial MS --goal MS [--available a,b]
                 [--max-depth N] [-o DIR]
    twinkit report <dir>

Exit codes: 0 success, 2 parse/validation error, 3 no plan found or
observations inconsistent with an all-OK plant, 4 I/O failure.

Anomaly scores are normality scores (low = anomalous).  AUC uses the
rank statistic with ties counted one half, after negating scores so
anomalous samples are the positive class.  The decision threshold is
fixed at the 5th percentile of the fault-free training scores; a sample
is flagged anomalous when its score falls strictly below it.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .causality import load_model_file
from .data_model import DataStore
from .diagnosis import diagnose, observations_from_data, parse_rules_file
from .errors import (
    DanglingReference,
    EmptyInput,
    IoError,
    NoPlanFound,
    ParseError,
    TwinError,
)
from .planning import parse_multiset, plan as plan_search
from .prediction import PredictionEngine, make_backend
from .simulator import load_labels, load_scenario, run_full, save_labels, topology_for

#: Dynamic scoring slides a window of this many samples, stride 1.
WINDOW_LEN = 20

#: Fraction of fault-free training scores below the decision threshold.
THRESHOLD_QUANTILE = 0.05


# --- evaluation ---

def tied_ranks(values) -> np.ndarray:
    """1-based ranks with ties replaced by their average rank."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def rank_auc(scores, labels) -> float | None:
    """Mann-Whitney AUC of 'low score = anomalous'; None without both classes."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = tied_ranks(-scores)
    pos_sum = float(ranks[labels == 1].sum())
    return (pos_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def anomaly_threshold(train_scores) -> float:
    train_scores = np.asarray(train_scores, dtype=float)
    if len(train_scores) == 0:
        raise EmptyInput("threshold needs at least one training score")
    return float(np.quantile(train_scores, THRESHOLD_QUANTILE, method="lower"))


@dataclass
class EvalReport:
    """AUC/F1 and the confusion counts of one detector on one run."""

    config: str
    fault: str
    mode: str
    auc: float | None
    f1: float | None
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def fpr(self) -> float | None:
        return self.fp / (self.fp + self.tn) if (self.fp + self.tn) else None

    def row(self) -> str:
        fmt = lambda v: "  n/a" if v is None else f"{v:.3f}"
        return (
            f"{self.config:<8} {self.fault:<12} {self.mode:<8} "
            f"AUC={fmt(self.auc)} F1={fmt(self.f1)} FPR={fmt(self.fpr)} thr={self.threshold:.4f}"
        )


def evaluate_anomaly(scored, train_scores, config="", fault="", mode="") -> EvalReport:
    """Score/label pairs -> report at the fixed training-quantile threshold."""
    if not len(scored):
        raise EmptyInput("no scored samples to evaluate")
    scores = np.array([s for s, _ in scored], dtype=float)
    labels = np.array([l for _, l in scored], dtype=int)
    threshold = anomaly_threshold(train_scores)
    flagged = scores < threshold
    tp = int((flagged & (labels == 1)).sum())
    fp = int((flagged & (labels == 0)).sum())
    tn = int((~flagged & (labels == 0)).sum())
    fn = int((~flagged & (labels == 1)).sum())
    f1 = None
    if (labels == 1).any():
        f1 = 2.0 * tp / (2.0 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0
    return EvalReport(
        config=config,
        fault=fault,
        mode=mode,
        auc=rank_auc(scores, labels),
        f1=f1,
        threshold=threshold,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
    )


# --- score extraction ---

def static_scores(engine: PredictionEngine, store: DataStore) -> list[tuple[float, float]]:
    """(t, score) for every stored sample."""
    return [(t, engine.anomaly_static(x)) for t, x in zip(store.times(), store.matrix())]


def dynamic_scores(
    engine: PredictionEngine, store: DataStore, window_len: int = WINDOW_LEN
) -> list[tuple[float, float]]:
    """(window-end t, score) for every full window, stride 1."""
    samples = store.samples()
    out = []
    for end in range(window_len - 1, len(samples)):
        window = samples[end - window_len + 1 : end + 1]
        out.append((window[-1].at, engine.anomaly_dynamic(window)))
    return out


def _label_lookup(labels) -> dict[float, int]:
    return {t: flag for t, flag, _ in labels}


def _pair_with_labels(scored, label_at: dict[float, int]) -> list[tuple[float, int]]:
    pairs = []
    for t, score in scored:
        if t not in label_at:
            raise ParseError(f"no label for sample at t={t}")
        pairs.append((score, label_at[t]))
    return pairs


def detect(
    train_csv,
    test_csv,
    labels_csv,
    backend: str = "knn-kde",
    config: str | None = None,
    window_len: int = WINDOW_LEN,
) -> tuple[EvalReport, EvalReport]:
    """Fit on fault-free training data, score the test run both ways."""
    train = DataStore.load_csv(train_csv)
    test = DataStore.load_csv(test_csv, schema=train.schema)
    labels = load_labels(labels_csv)
    label_at = _label_lookup(labels)

    topology = topology_for(config) if config else None
    engine = PredictionEngine(train.schema, make_backend(backend, topology))
    engine.fit(train.samples())

    fault = next((lab for _, flag, lab in labels if flag), "stable")
    static_report = evaluate_anomaly(
        _pair_with_labels(static_scores(engine, test), label_at),
        engine.training_static_scores(),
        config=config or "",
        fault=fault,
        mode="static",
    )
    _, train_dyn = engine.training_dynamic_scores(window_len)
    dynamic_report = evaluate_anomaly(
        _pair_with_labels(dynamic_scores(engine, test, window_len), label_at),
        train_dyn,
        config=config or "",
        fault=fault,
        mode="dynamic",
    )
    return static_report, dynamic_report


# --- commands ---

def _write_json(path: Path, payload) -> None:
    try:
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from None


def cmd_simulate(args) -> int:
    sc = load_scenario(args.scenario)
    out = Path(args.out) if args.out else Path("runs") / Path(args.scenario).stem
    out.mkdir(parents=True, exist_ok=True)
    result = run_full(sc)
    result.store.save_csv(out / "data.csv")
    save_labels(result.labels, out / "labels.csv")
    manifest = {
        "name": sc.name or Path(args.scenario).stem,
        "config": sc.config,
        "seed": sc.seed,
        "dt": sc.dt,
        "duration": sc.duration,
        "backend": sc.backend,
        "faults": [
            {"component": f.component, "mode": f.mode, "onset": f.onset, "magnitude": f.magnitude}
            for f in sc.faults
        ],
        "components": [c.id for c in result.topology.components()],
        "schema": result.store.schema.names,
        "n_samples": len(result.store),
    }
    _write_json(out / "manifest.json", manifest)
    print(f"simulate: wrote {len(result.store)} samples to {out}/data.csv (seed {sc.seed})")
    return 0


def cmd_detect(args) -> int:
    static_report, dynamic_report = detect(
        args.train, args.test, args.labels, backend=args.backend, config=args.config
    )
    for rep in (static_report, dynamic_report):
        print(rep.row())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "eval_static.json", asdict(static_report))
        _write_json(out / "eval_dynamic.json", asdict(dynamic_report))
    return 0


def cmd_diagnose(args) -> int:
    run_dir = Path(args.run_dir)
    store = DataStore.load_csv(run_dir / "data.csv")
    try:
        manifest = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
        comps = manifest["components"]
    except (OSError, json.JSONDecodeError, KeyError):
        raise ParseError(f"{run_dir}/manifest.json missing or lacks 'components'")
    rules = parse_rules_file(args.rules)
    loaded = load_model_file(args.bindings, store.schema)
    checkpoints = [float(t) for t in args.at] if args.at else [store.time_range()[1]]

    records = []
    any_suspects = False
    for t in checkpoints:
        obs = observations_from_data(store, loaded.model, loaded.bindings, t)
        result = diagnose(rules, obs, comps)
        suspects = [sorted(d) for d in result]
        consistent_all_ok = result == [frozenset()]
        any_suspects |= not consistent_all_ok
        records.append(
            {
                "t": t,
                "observed_true": sorted(obs.as_true),
                "observed_false": sorted(obs.as_false),
                "diagnoses": suspects,
                "cardinality": len(result[0]) if result else None,
                "consistent_all_ok": consistent_all_ok,
            }
        )
        shown = "OK (no suspects)" if consistent_all_ok else "; ".join(
            "{" + ",".join(d) + "}" for d in suspects
        )
        print(f"diagnose t={t:g}: {shown}")
    _write_json(run_dir / "diagnosis.json", {"checkpoints": records})
    return 3 if any_suspects else 0


def cmd_plan(args) -> int:
    from .data_model import SignalSchema

    loaded = load_model_file(args.steps, SignalSchema([]))
    steps = loaded.model.list_product_causalities()
    available = None
    if args.available is not None:
        available = {c.strip() for c in args.available.split(",") if c.strip()}
    initial = parse_multiset(args.initial)
    goal = parse_multiset(args.goal)
    try:
        found = plan_search(steps, initial, goal, available, max_depth=args.max_depth)
    except NoPlanFound as e:
        print(f"plan: no plan found ({e})")
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            _write_json(out / "plan.json", {"initial": str(initial), "goal": str(goal), "plan": None})
        return 3
    by_id = {s.id: s for s in steps}
    names = [by_id[sid].name for sid in found.steps]
    if names:
        for i, name in enumerate(names, start=1):
            print(f"{i}. {name}")
    else:
        print("goal already satisfied; empty plan")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(
            out / "plan.json",
            {"initial": str(initial), "goal": str(goal), "plan": names},
        )
    return 0


def cmd_report(args) -> int:
    d = Path(args.dir)
    if not d.is_dir():
        raise IoError(f"{d} is not a directory")
    lines = [f"run report: {d}"]
    manifest = d / "manifest.json"
    if manifest.exists():
        m = json.loads(manifest.read_text(encoding="utf-8"))
        faults = ", ".join(f"{f['component']}:{f['mode']}@{f['onset']:g}" for f in m.get("faults", [])) or "none"
        lines.append(
            f"  scenario {m.get('name')}: config={m.get('config')} seed={m.get('seed')} "
            f"samples={m.get('n_samples')} faults: {faults}"
        )
    for name in ("eval_static.json", "eval_dynamic.json"):
        p = d / name
        if p.exists():
            r = json.loads(p.read_text(encoding="utf-8"))
            auc = "n/a" if r.get("auc") is None else f"{r['auc']:.3f}"
            f1 = "n/a" if r.get("f1") is None else f"{r['f1']:.3f}"
            lines.append(
                f"  {r.get('mode', '?'):<8} AUC={auc} F1={f1} "
                f"TP={r.get('tp')} FP={r.get('fp')} TN={r.get('tn')} FN={r.get('fn')}"
            )
    diag = d / "diagnosis.json"
    if diag.exists():
        payload = json.loads(diag.read_text(encoding="utf-8"))
        for rec in payload.get("checkpoints", []):
            shown = "OK" if rec.get("consistent_all_ok") else "; ".join(
                "{" + ",".join(s) + "}" for s in rec.get("diagnoses", [])
            )
            lines.append(f"  diagnosis t={rec.get('t'):g}: {shown}")
    planf = d / "plan.json"
    if planf.exists():
        payload = json.loads(planf.read_text(encoding="utf-8"))
        steps = payload.get("plan")
        lines.append(f"  plan: {' -> '.join(steps) if steps else steps}")
    text = "\n".join(lines)
    print(text)
    try:
        (d / "report.txt").write_text(text + "\n", encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot write report: {e}") from None
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twinkit", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write data/labels/manifest")
    p.add_argument("scenario")
    p.add_argument("-o", "--out", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("detect", help="fit on train CSV, score test CSV, report AUC/F1")
    p.add_argument("train")
    p.add_argument("test")
    p.add_argument("labels")
    p.add_argument("--backend", default="knn-kde", choices=["knn-kde", "physics"])
    p.add_argument("--config", default=None, help="plant config (needed for physics backend)")
    p.add_argument("-o", "--out", default=None)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("diagnose", help="minimal-cardinality diagnosis at checkpoints")
    p.add_argument("rules")
    p.add_argument("run_dir")
    p.add_argument("bindings")
    p.add_argument("--at", action="append", default=None, help="checkpoint time (repeatable)")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("plan", help="shortest step sequence from initial to goal")
    p.add_argument("steps")
    p.add_argument("--initial", required=True)
    p.add_argument("--goal", required=True)
    p.add_argument("--available", default=None, help="comma-separated usable components")
    p.add_argument("--max-depth", type=int, default=10)
    p.add_argument("-o", "--out", default=None)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("report", help="summarize the artifacts in a run directory")
    p.add_argument("dir")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NoPlanFound as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except IoError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    except (ParseError, DanglingReference, TwinError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Anomaly detection over the whole fault catalogue.

For each configuration a detector is trained on a fault-free run and
scored on every catalogued test run, statically (KDE rank of each
sample) and dynamically (one-step residual confidence per window).
Prints one AUC/F1 row per run and mode, like an evaluation table.
"""

from pathlib import Path

from twinkit.harness import detect

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
RUNS = Path("/tmp/twinkit_demo_runs")


def simulate(path: Path) -> Path:
    from twinkit.harness import main

    out = RUNS / path.stem
    code = main(["simulate", str(path), "-o", str(out)])
    assert code == 0
    return out


print(f"{'config':<8} {'fault':<14} {'mode':<8} {'AUC':>6} {'F1':>6} {'FPR':>6}")
for config in ("a_tank", "3_tanks", "4_tanks"):
    train_dir = simulate(SCENARIOS / f"{config}_train.json")
    for test_file in sorted(SCENARIOS.glob(f"{config}_*.json")):
        if test_file.stem == f"{config}_train":
            continue
        test_dir = simulate(test_file)
        static_rep, dynamic_rep = detect(
            train_dir / "data.csv",
            test_dir / "data.csv",
            test_dir / "labels.csv",
            backend="knn-kde",
            config=config,
        )
        fault = test_file.stem.replace(f"{config}_", "")
        for rep in (static_rep, dynamic_rep):
            fmt = lambda v: "   n/a" if v is None else f"{v:6.3f}"
            print(f"{config:<8} {fault:<14} {rep.mode:<8} {fmt(rep.auc)} {fmt(rep.f1)} {fmt(rep.fpr)}")

"""Shared fixtures: cached scenario runs and fitted engines.

Scenario runs and fitted engines are expensive enough to share; both
caches are keyed so every test sees identical, deterministic artifacts.
The session-finish hook reports the suite's wall-clock budget.
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

import twinkit as tk
from twinkit.prediction import PredictionEngine, make_backend

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

#: Full-suite wall-clock budget in seconds.
SUITE_BUDGET_S = 300.0

_t_start = None


def pytest_sessionstart(session):
    global _t_start
    _t_start = time.monotonic()


def pytest_sessionfinish(session, exitstatus):
    if _t_start is None:
        return
    elapsed = time.monotonic() - _t_start
    ok = elapsed < SUITE_BUDGET_S
    line = f"[ACCEPTANCE 8] full suite wall clock: {'PASS' if ok else 'FAIL'} ({elapsed:.1f}s < {SUITE_BUDGET_S:.0f}s)"
    print("\n" + line)
    if not ok and exitstatus == 0:
        session.exitstatus = 1


@pytest.fixture(scope="session")
def scenarios_dir() -> Path:
    return SCENARIOS


class RunCache:
    def __init__(self):
        self._runs: dict[str, tk.RunResult] = {}
        self._engines: dict[tuple[str, str], PredictionEngine] = {}

    def run(self, name: str) -> tk.RunResult:
        """RunResult for a shipped scenario file (cached)."""
        if name not in self._runs:
            sc = tk.load_scenario(SCENARIOS / f"{name}.json")
            self._runs[name] = tk.run_full(sc)
        return self._runs[name]

    def engine(self, config: str, backend: str) -> PredictionEngine:
        """Engine fitted on the shipped training run (cached)."""
        key = (config, backend)
        if key not in self._engines:
            train = self.run(f"{config}_train")
            topo = train.topology if backend == "physics" else None
            eng = PredictionEngine(train.store.schema, make_backend(backend, topo))
            eng.fit(train.store.samples())
            self._engines[key] = eng
        return self._engines[key]


@pytest.fixture(scope="session")
def runs() -> RunCache:
    return RunCache()

"""Extrapolation with failure modes, plus static and dynamic anomaly scores.

Two backends ship with the twin:

* ``physics`` replays the plant's own discrete dynamics and honors
  failure modes, so what-if predictions under a blocked valve or a slow
  pump are exact.
* ``knn-kde`` is purely data driven: k-nearest-neighbor completion of
  partial vectors and neighbor-velocity extrapolation of windows, both
  on z-normalized signals.  It cannot model failure modes and returns
  all-null results when asked to.

Partial vectors use NaN for missing entries.  Every prediction carries a
per-entry confidence in [0, 1]; entries the backend cannot compute stay
null in both the value and the confidence vector (paired nullity).

Anomaly scoring is backend independent on the static side (Gaussian KDE
rank against the training set) and backend driven on the dynamic side
(one-step-ahead residuals scaled by the training residual spread).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .components import DEFAULT_MAGNITUDE
from .data_model import Sample, SignalSchema, is_missing
from .errors import (
    EmptyHistory,
    EmptyWindow,
    IncompleteVector,
    InvalidHorizon,
    InvalidScenario,
    NonMonotonicWindow,
    NotFitted,
    SchemaMismatch,
    WindowTooShort,
)
from .simulator import FAULT_MODES, Topology, make_state, signal_vector, step_once

#: Guard against zero variance when normalizing signals.
SIGMA_MIN = 1e-6

#: Neighbors used by the data-driven backend.
KNN_K = 5

_SESSION_TO_FAULT = {mode: token for token, (_, mode) in FAULT_MODES.items()}


@dataclass(frozen=True)
class PredictionResult:
    """Predicted vector plus per-entry confidence; NaN pairs mark nulls."""

    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if x.shape != p.shape:
            raise SchemaMismatch("value and confidence vectors differ in shape")
        if not np.array_equal(np.isnan(x), np.isnan(p)):
            raise SchemaMismatch("x and p must be null on exactly the same entries")
        ok = ~np.isnan(p)
        if ok.any() and ((p[ok] < 0.0) | (p[ok] > 1.0)).any():
            raise SchemaMismatch("confidences must lie in [0, 1]")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.x)


def _all_null(n: int) -> PredictionResult:
    return PredictionResult(np.full(n, np.nan), np.full(n, np.nan))


@dataclass(frozen=True)
class ZStats:
    """Per-signal mean and (floored) standard deviation of the fit data."""

    mu: np.ndarray
    sigma: np.ndarray

    def z(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mu) / self.sigma


def resolve_failures(
    failed: dict[str, str], magnitudes: dict[str, float] | None = None
) -> dict[str, tuple[str, float]]:
    """Failure-mode map -> (mode, magnitude) map using per-mode defaults."""
    magnitudes = magnitudes or {}
    out = {}
    for cid, mode in failed.items():
        out[cid] = (mode, float(magnitudes.get(cid, DEFAULT_MAGNITUDE.get(mode, 0.0))))
    return out


class PhysicsBackend:
    """Replays the plant dynamics; exact on fault-free simulator data."""

    name = "physics"
    honors_failures = True

    def __init__(self, topology: Topology):
        self.topology = topology
        self.schema = topology.schema()
        self._n_valves = len(topology.valves)

    def fit(self, history: list[Sample], stats: ZStats) -> None:
        # The dynamics are closed form; fitting only pins the schema.
        del history, stats

    def _levels_from(self, x: np.ndarray) -> dict[str, float]:
        return {
            t.id: float(x[self._n_valves + i]) for i, t in enumerate(self.topology.tanks)
        }

    def predict_dynamic(
        self, window: list[Sample], dt: float, active: dict[str, tuple[str, float]]
    ) -> PredictionResult:
        last = window[-1]
        levels = self._levels_from(last.x)
        state = make_state(last.at, levels, self.topology, active, dt)
        nxt, _ = step_once(state, self.topology, active, dt)
        x = signal_vector(nxt, self.topology)
        return PredictionResult(x, np.ones_like(x))

    def predict_static(
        self, x_partial: np.ndarray, active: dict[str, tuple[str, float]]
    ) -> PredictionResult:
        """Complete a partial vector by propagating the flow laws.

        Known levels yield their valves' flows; known discharge flows are
        inverted for the feeding tank's level.  Iterates to a fixpoint;
        whatever remains unreachable stays null.  Assumes the plant
        sustains the demanded flows (no per-step volume limiting).
        """
        topo = self.topology
        n = len(self.schema)
        known = {i: float(v) for i, v in enumerate(x_partial) if not math.isnan(v)}

        pump_factor = 1.0
        if topo.pump_id in active:
            mode, mag = active[topo.pump_id]
            if mode in ("slow", "fast"):
                pump_factor = mag

        def params(v):
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

        flow_idx = {v.id: i for i, v in enumerate(topo.valves)}
        level_idx = {t.id: self._n_valves + i for i, t in enumerate(topo.tanks)}

        changed = True
        while changed:
            changed = False
            for v in topo.valves:
                fi = flow_idx[v.id]
                u, k, blocked = params(v)
                if fi not in known:
                    if blocked:
                        known[fi] = 0.0
                        changed = True
                    elif v.src == "source":
                        known[fi] = topo.source_flow * u * pump_factor
                        changed = True
                    elif level_idx[v.src] in known:
                        h = max(known[level_idx[v.src]], 0.0)
                        known[fi] = u * k * math.sqrt(h)
                        changed = True
                elif v.src != "source" and level_idx[v.src] not in known:
                    if not blocked and u * k > 0.0:
                        known[level_idx[v.src]] = (known[fi] / (u * k)) ** 2
                        changed = True

        x = np.full(n, np.nan)
        p = np.full(n, np.nan)
        for i, val in known.items():
            x[i] = val
            p[i] = 1.0
        return PredictionResult(x, p)


class KnnKdeBackend:
    """k-NN completion and neighbor-velocity extrapolation (z-space)."""

    name = "knn-kde"
    honors_failures = False

    def __init__(self, k: int = KNN_K):
        self.k = k
        self._X: np.ndarray | None = None
        self._Z: np.ndarray | None = None
        self._V: np.ndarray | None = None  # per-pair velocity, raw units/s
        self._stats: ZStats | None = None

    def fit(self, history: list[Sample], stats: ZStats) -> None:
        X = np.stack([s.x for s in history])
        t = np.array([s.at for s in history])
        self._X = X
        self._stats = stats
        self._Z = stats.z(X)
        if len(history) >= 2:
            dts = np.diff(t)[:, None]
            self._V = (X[1:] - X[:-1]) / dts
        else:
            self._V = np.empty((0, X.shape[1]))

    def _neighbors(self, d: np.ndarray, k: int) -> np.ndarray:
        # Stable sort breaks distance ties by training index.
        order = np.argsort(d, kind="stable")
        return order[:k]

    def predict_static(self, x_partial: np.ndarray, active) -> PredictionResult:
        del active  # engine guarantees no failure modes reach this backend
        X, Z, stats = self._X, self._Z, self._stats
        assert X is not None and Z is not None and stats is not None
        n = X.shape[1]
        obs = ~np.isnan(x_partial)
        zq = stats.z(np.where(obs, x_partial, 0.0))
        if obs.any():
            d = np.sqrt(((Z[:, obs] - zq[obs]) ** 2).sum(axis=1))
        else:
            d = np.zeros(len(X))
        nbrs = self._neighbors(d, min(self.k, len(X)))
        w = 1.0 / (d[nbrs] + 1e-12)
        w = w / w.sum()

        x = np.array(x_partial, dtype=float)
        p = np.full(n, np.nan)
        miss = ~obs
        if miss.any():
            cand = X[nbrs][:, miss]                      # (k, n_missing)
            est = (w[:, None] * cand).sum(axis=0)
            spread = np.sqrt((w[:, None] * (cand - est) ** 2).sum(axis=0))
            spread_z = spread / stats.sigma[miss]
            x[miss] = est
            p[miss] = np.exp(-0.5 * spread_z**2)
        return PredictionResult(x, p)

    def predict_dynamic(self, window: list[Sample], dt: float, active) -> PredictionResult:
        del active
        X, Z, V, stats = self._X, self._Z, self._V, self._stats
        assert X is not None and Z is not None and V is not None and stats is not None
        n = X.shape[1]
        if len(V) == 0:
            return _all_null(n)
        xq = np.asarray(window[-1].x, dtype=float)
        zq = stats.z(xq)
        d = np.sqrt(((Z[:-1] - zq) ** 2).sum(axis=1))
        return self._velocity_predict(xq, d, dt)

    def _velocity_predict(self, xq: np.ndarray, d: np.ndarray, dt: float) -> PredictionResult:
        V, stats = self._V, self._stats
        assert V is not None and stats is not None
        nbrs = self._neighbors(d, min(self.k, len(V)))
        w = 1.0 / (d[nbrs] + 1e-12)
        w = w / w.sum()
        cand = xq + dt * V[nbrs]                          # (k, n) candidate successors
        est = (w[:, None] * cand).sum(axis=0)
        spread = np.sqrt((w[:, None] * (cand - est) ** 2).sum(axis=0))
        spread_z = spread / stats.sigma
        return PredictionResult(est, np.exp(-0.5 * spread_z**2))

    def loo_dynamic_residuals(self, history: list[Sample]) -> np.ndarray:
        """One-step-ahead residuals over the fit data, own pair excluded."""
        X, Z, V = self._X, self._Z, self._V
        assert X is not None and Z is not None and V is not None
        t = np.array([s.at for s in history])
        n_pairs = len(V)
        if n_pairs == 0:
            return np.empty((0, X.shape[1]))
        Q = Z[:-1]
        D = np.sqrt(((Q[:, None, :] - Q[None, :, :]) ** 2).sum(axis=2))
        np.fill_diagonal(D, np.inf)
        residuals = np.empty((n_pairs, X.shape[1]))
        for j in range(n_pairs):
            pred = self._velocity_predict(X[j], D[j], t[j + 1] - t[j])
            residuals[j] = X[j + 1] - pred.x
        return residuals


def make_backend(name: str, topology: Topology | None = None):
    if name == "physics":
        if topology is None:
            raise InvalidScenario("physics backend needs a plant topology")
        return PhysicsBackend(topology)
    if name == "knn-kde":
        return KnnKdeBackend()
    raise InvalidScenario(f"unknown backend {name!r}; expected 'physics' or 'knn-kde'")


class PredictionEngine:
    """Fitted prediction state shared by all sessions of a twin.

    Immutable after :meth:`fit`; sessions carrying failure assignments
    are cheap handles over one engine, which is the supported pattern
    for concurrent what-if queries.
    """

    def __init__(self, schema: SignalSchema, backend):
        self.schema = schema
        self.backend = backend
        self._fitted = False

    # --- fitting ---

    def fit(self, history: list[Sample]) -> "PredictionEngine":
        if not history:
            raise EmptyHistory("fit needs at least one sample")
        times = [s.at for s in history]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise NonMonotonicWindow("history timestamps must strictly increase")
        X = np.stack([self.schema.validate_vector(s.x) for s in history])
        mu = X.mean(axis=0)
        sigma = np.maximum(X.std(axis=0), SIGMA_MIN)
        self.stats = ZStats(mu, sigma)
        self._history = list(history)
        self._fit_kde(X)
        self.backend.fit(history, self.stats)
        self._fit_residuals(history)
        self._fitted = True
        return self

    def _fit_kde(self, X: np.ndarray) -> None:
        N, n = X.shape
        Z = self.stats.z(X)
        zstd = np.maximum(Z.std(axis=0), SIGMA_MIN)
        # Silverman's rule per dimension on the normalized data.
        self._bandwidth = zstd * (4.0 / ((n + 2.0) * N)) ** (1.0 / (n + 4.0))
        self._kde_W = Z / self._bandwidth
        self._kde_const = float(np.prod(1.0 / (math.sqrt(2.0 * math.pi) * self._bandwidth)))
        if N == 1:
            self._loo_density = np.zeros(1)
        else:
            sq = ((self._kde_W[:, None, :] - self._kde_W[None, :, :]) ** 2).sum(axis=2)
            Kmat = self._kde_const * np.exp(-0.5 * sq)
            self._loo_density = (Kmat.sum(axis=1) - np.diag(Kmat)) / (N - 1)

    def _fit_residuals(self, history: list[Sample]) -> None:
        if isinstance(self.backend, KnnKdeBackend):
            res = self.backend.loo_dynamic_residuals(history)
        else:
            res = self._physics_residuals(history)
        if len(res) == 0:
            res_std = np.zeros(len(self.schema))
        else:
            res_std = np.nanstd(np.where(np.isnan(res), np.nan, res), axis=0)
            res_std = np.where(np.isnan(res_std), 0.0, res_std)
        self.residual_std = np.maximum(res_std, SIGMA_MIN * self.stats.sigma)
        self._train_residuals = res

    def _physics_residuals(self, history: list[Sample]) -> np.ndarray:
        rows = []
        for a, b in zip(history, history[1:]):
            pred = self.backend.predict_dynamic([a], b.at - a.at, {})
            rows.append(b.x - pred.x)
        return np.stack(rows) if rows else np.empty((0, len(self.schema)))

    def _require_fitted(self) -> None:
        if not self._fitted:
            raise NotFitted("call fit_backend before predicting or scoring")

    # --- extrapolation ---

    def predict_static(
        self, x_partial, active: dict[str, tuple[str, float]]
    ) -> PredictionResult:
        self._require_fitted()
        x = self.schema.validate_vector(x_partial, allow_missing=True)
        given = ~is_missing(x)
        if active and not self.backend.honors_failures:
            return _all_null(len(self.schema))
        if given.all():
            return PredictionResult(x.copy(), np.ones_like(x))
        raw = self.backend.predict_static(x, active)
        out_x = np.array(raw.x, dtype=float)
        out_p = np.array(raw.p, dtype=float)
        # Given entries are inputs: echo them verbatim with certainty.
        out_x[given] = x[given]
        out_p[given] = 1.0
        return PredictionResult(out_x, out_p)

    def predict_dynamic(
        self, window: list[Sample], dt: float, active: dict[str, tuple[str, float]]
    ) -> PredictionResult:
        self._require_fitted()
        self._check_window(window, minimum=1)
        if not dt > 0:
            raise InvalidHorizon(f"prediction horizon must be > 0, got {dt}")
        if active and not self.backend.honors_failures:
            return _all_null(len(self.schema))
        return self.backend.predict_dynamic(window, dt, active)

    def _check_window(self, window: list[Sample], minimum: int) -> None:
        if len(window) == 0:
            raise EmptyWindow("window holds no samples")
        if len(window) < minimum:
            raise WindowTooShort(f"window needs >= {minimum} samples, got {len(window)}")
        times = [s.at for s in window]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise NonMonotonicWindow("window timestamps must strictly increase")
        for s in window:
            self.schema.validate_vector(s.x)

    # --- anomaly scores ---

    def density(self, x) -> float:
        """Gaussian KDE density of x on the z-normalized training set."""
        self._require_fitted()
        z = self.stats.z(np.asarray(x, dtype=float)) / self._bandwidth
        sq = ((self._kde_W - z) ** 2).sum(axis=1)
        return float(self._kde_const * np.exp(-0.5 * sq).mean())

    def anomaly_static(self, x) -> float:
        """Fraction of training points whose leave-one-out density does
        not exceed the query density; low means anomalous."""
        self._require_fitted()
        x = self.schema.validate_vector(x, allow_missing=True)
        if is_missing(x).any():
            raise IncompleteVector("static anomaly scoring needs a complete vector")
        return float((self._loo_density <= self.density(x)).mean())

    def anomaly_dynamic(self, window: list[Sample]) -> float:
        """Gaussian confidence that the last sample continues the window.

        The last sample is predicted from its predecessors; per-signal
        residuals are scaled by the training residual spread and folded
        into exp(-mean(r^2)/2), the geometric mean of the per-signal
        confidences.
        """
        self._require_fitted()
        self._check_window(window, minimum=2)
        last = window[-1]
        prev = window[:-1]
        pred = self.predict_dynamic(prev, last.at - prev[-1].at, {})
        ok = ~pred.missing
        if not ok.any():
            raise NotFitted("backend cannot predict this window")
        r = (last.x[ok] - pred.x[ok]) / self.residual_std[ok]
        return float(np.exp(-0.5 * float((r**2).mean())))

    # --- threshold calibration (leave-one-out, fair to unseen data) ---

    def training_static_scores(self) -> np.ndarray:
        """LOO rank of each training point among the LOO densities."""
        self._require_fitted()
        loo = self._loo_density
        return (loo[None, :] <= loo[:, None]).mean(axis=1)

    def training_dynamic_scores(self, window_len: int) -> tuple[np.ndarray, np.ndarray]:
        """(window-end times, scores) over the fit data, own pair excluded."""
        self._require_fitted()
        res = self._train_residuals
        times = np.array([s.at for s in self._history])
        scores, ends = [], []
        for j in range(len(res)):
            end = j + 1
            if end < window_len - 1 + 1:
                continue
            row = res[j]
            ok = ~np.isnan(row)
            if not ok.any():
                continue
            r = row[ok] / self.residual_std[ok]
            scores.append(math.exp(-0.5 * float((r**2).mean())))
            ends.append(times[end])
        return np.array(ends), np.array(scores)


class TwinSession:
    """A single-owner prediction handle carrying the failure assignment.

    Sessions over one fitted engine do not interfere; activating failure
    modes in one session never leaks into another.
    """

    def __init__(self, engine: PredictionEngine, components: dict):
        self._engine = engine
        self._components = components
        self._failed: dict[str, str] = {}
        self._active: dict[str, tuple[str, float]] = {}

    @property
    def failed_comps(self) -> dict[str, str]:
        return dict(self._failed)

    def set_failed_comps(
        self, failed: dict[str, str], magnitudes: dict[str, float] | None = None
    ) -> None:
        """Predict under the given component failure modes from now on.

        ``magnitudes`` optionally overrides the per-mode defaults (stuck
        position, jam scale, leak coefficient, pump factor).
        """
        from .components import validate_failure_assignment

        checked = validate_failure_assignment(self._components, failed)
        self._failed = checked
        self._active = resolve_failures(checked, magnitudes)

    def extrapolate_static(self, x_partial) -> PredictionResult:
        return self._engine.predict_static(x_partial, self._active)

    def extrapolate_dynamic(self, window: list[Sample], dt: float) -> PredictionResult:
        return self._engine.predict_dynamic(window, dt, self._active)

    def anomaly_score_static(self, x) -> float:
        return self._engine.anomaly_static(x)

    def anomaly_score_dynamic(self, window: list[Sample]) -> float:
        return self._engine.anomaly_dynamic(window)

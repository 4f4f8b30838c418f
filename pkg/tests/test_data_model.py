"""Data store: ingest ordering, point queries, interpolation, CSV."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import twinkit as tk
from twinkit.data_model import DataStore, Sample, SignalSchema
from twinkit.errors import (
    EmptyStore,
    IndexOutOfRange,
    NonMonotonicTime,
    SchemaMismatch,
    TimeOutOfRange,
)


def make_store(rows, names=("a", "b")):
    store = DataStore(SignalSchema.from_names(names))
    for t, x in rows:
        store.ingest(Sample(t, np.asarray(x, dtype=float)))
    return store


class TestIngest:
    def test_first_insert(self):
        store = make_store([(0.0, (0.0, 0.0))])
        assert len(store) == 1

    def test_equal_timestamp_rejected(self):
        store = make_store([(1.0, (1.0, 2.0))])
        with pytest.raises(NonMonotonicTime):
            store.ingest(Sample(1.0, np.array([3.0, 4.0])))
        assert len(store) == 1  # store unchanged

    def test_earlier_timestamp_rejected_store_unchanged(self):
        store = make_store([(2.0, (1.0, 2.0))])
        with pytest.raises(NonMonotonicTime):
            store.ingest(Sample(1.5, np.array([3.0, 4.0])))
        assert store.time_range() == (2.0, 2.0)
        assert np.array_equal(store.get_data(2.0), [1.0, 2.0])

    def test_wrong_length_rejected(self):
        store = make_store([])
        with pytest.raises(SchemaMismatch):
            store.ingest(Sample(0.0, np.array([1.0])))

    def test_null_entries_rejected(self):
        store = make_store([])
        with pytest.raises(SchemaMismatch):
            store.ingest(Sample(0.0, np.array([1.0, np.nan])))

    def test_thousand_simulator_samples(self):
        # sampling plan: duration/dt samples at t = 0, dt, ..., (n-1)*dt
        sc = tk.Scenario(config="a_tank", duration=1000.0, dt=1.0, seed=4)
        store = tk.run(sc)
        assert len(store) == 1000
        assert store.time_range() == (0.0, 999.0)

    @given(st.lists(st.floats(0.0, 1e6, allow_nan=False), min_size=2, max_size=20))
    @settings(max_examples=50, deadline=None)
    def test_monotonicity_enforced(self, times):
        store = make_store([])
        accepted = []
        for t in times:
            try:
                store.ingest(Sample(t, np.array([0.0, 0.0])))
                accepted.append(t)
            except NonMonotonicTime:
                pass
        assert accepted == sorted(set(accepted))
        assert len(store) == len(accepted)


class TestGetData:
    def test_exact_hit_returns_stored_vector_bitwise(self):
        x = np.array([0.1 + 0.2, 1e-17])
        store = make_store([(0.0, (0.0, 0.0))])
        store.ingest(Sample(1.0, x))
        got = store.get_data(1.0)
        assert got.tobytes() == x.tobytes()

    def test_exact_hit_signal(self):
        store = make_store([(0.0, (2.0, 5.0)), (1.0, (4.0, 7.0))])
        assert store.get_signal(0, 0.0) == 2.0
        assert store.get_signal(1, 1.0) == 7.0

    def test_midpoint_interpolation(self):
        store = make_store([(0.0, (2.0, 10.0)), (1.0, (4.0, 20.0))])
        assert store.get_signal(0, 0.5) == pytest.approx(3.0)
        assert np.allclose(store.get_data(0.5), [3.0, 15.0])

    def test_out_of_range(self):
        store = make_store([(0.0, (0.0, 0.0)), (1.0, (1.0, 1.0))])
        with pytest.raises(TimeOutOfRange):
            store.get_data(2.0)
        with pytest.raises(TimeOutOfRange):
            store.get_signal(0, -1.0)

    def test_index_out_of_range(self):
        store = make_store([(0.0, (0.0, 0.0))])
        with pytest.raises(IndexOutOfRange):
            store.get_signal(2, 0.0)
        with pytest.raises(IndexOutOfRange):
            store.get_signal(-1, 0.0)

    def test_empty_store(self):
        store = make_store([])
        with pytest.raises(EmptyStore):
            store.get_data(0.0)
        with pytest.raises(EmptyStore):
            store.time_range()

    @given(
        slope=st.floats(-10, 10, allow_nan=False),
        intercept=st.floats(-10, 10, allow_nan=False),
        q=st.floats(0.0, 9.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_affine_signal_interpolates_exactly(self, slope, intercept, q):
        # store an affine-in-time signal; any interior query matches the line
        store = make_store(
            [(float(t), (slope * t + intercept, -2.0 * t + 1.0)) for t in range(10)]
        )
        got = store.get_data(q)
        assert abs(got[0] - (slope * q + intercept)) <= 1e-9
        assert abs(got[1] - (-2.0 * q + 1.0)) <= 1e-9

    def test_vector_and_signal_agree(self):
        store = make_store([(float(t), (t * 1.7, 5.0 - t)) for t in range(6)])
        for t in (0.0, 0.25, 2.5, 4.9, 5.0):
            x = store.get_data(t)
            for i in range(2):
                assert store.get_signal(i, t) == x[i]


class TestTimeRange:
    def test_singleton(self):
        store = make_store([(5.0, (0.0, 0.0))])
        assert store.time_range() == (5.0, 5.0)

    def test_ordered_bounds(self):
        store = make_store([(float(t), (0.0, 0.0)) for t in range(10)])
        assert store.time_range() == (0.0, 9.0)

    def test_simulator_run_600s(self):
        sc = tk.Scenario(config="a_tank", duration=600.0, dt=1.0, seed=1)
        store = tk.run(sc)
        assert store.time_range() == (0.0, 599.0)


class TestCsv:
    def test_round_trip_bitwise(self, tmp_path):
        rng = np.random.default_rng(7)
        store = make_store([])
        for t in range(50):
            scale = 10.0 ** float(rng.integers(-8, 8))
            store.ingest(Sample(float(t) + 1e-9 * t, rng.standard_normal(2) * scale))
        path = tmp_path / "run.csv"
        store.save_csv(path)
        loaded = DataStore.load_csv(path)
        assert loaded.schema.names == store.schema.names
        assert loaded.matrix().tobytes() == store.matrix().tobytes()
        assert loaded.times().tobytes() == store.times().tobytes()

    def test_header_mismatch(self, tmp_path):
        store = make_store([(0.0, (1.0, 2.0))])
        path = tmp_path / "run.csv"
        store.save_csv(path)
        other = SignalSchema.from_names(["x", "y"])
        with pytest.raises(SchemaMismatch):
            DataStore.load_csv(path, schema=other)

    def test_missing_t_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n", encoding="utf-8")
        with pytest.raises(SchemaMismatch):
            DataStore.load_csv(path)


class TestSchema:
    def test_duplicate_names(self):
        with pytest.raises(SchemaMismatch):
            SignalSchema.from_names(["a", "a"])

    def test_negative_timestamp(self):
        with pytest.raises(NonMonotonicTime):
            Sample(-1.0, np.array([0.0]))

    def test_infinite_value_rejected(self):
        store = make_store([])
        with pytest.raises(SchemaMismatch):
            store.ingest(Sample(0.0, np.array([np.inf, 0.0])))

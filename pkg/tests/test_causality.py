"""Causality layer: halfspace events, concepts, parsing, consistency."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import twinkit as tk
from oracles import concept_member_bruteforce, segment_crossing_dense, segment_near_boundary
from twinkit.causality import (
    CausalModel,
    LinearInequality,
    check_state_consistency,
    load_model_text,
    parse_inequality,
)
from twinkit.data_model import SignalSchema
from twinkit.errors import (
    DanglingReference,
    EmptyRegion,
    IncompleteVector,
    ParseError,
    UnknownConcept,
    UnknownProduct,
    ZeroCoefficientVector,
)
from twinkit.planning import parse_multiset
from twinkit.tankmodels import fault_free_steady, model_text, signal_bands

SCHEMA3 = SignalSchema.from_names(["x0", "x1", "x2"])

finite_vec = arrays(np.float64, 3, elements=st.floats(-100, 100, allow_nan=False))


class TestInequalityParsing:
    def test_simple(self):
        (ineq,) = parse_inequality("2.0*x1 + 1.0*x2 < 9.9", SCHEMA3)
        assert np.array_equal(ineq.f, [0.0, 2.0, 1.0])
        assert ineq.c == 9.9
        assert ineq.holds(np.zeros(3))  # 0 < 9.9

    def test_bare_name_and_sign(self):
        (ineq,) = parse_inequality("-x0 < 0", SCHEMA3)
        assert np.array_equal(ineq.f, [-1.0, 0.0, 0.0])

    def test_greater_than_flips(self):
        (ineq,) = parse_inequality("x0 > 5", SCHEMA3)
        assert ineq.holds(np.array([6.0, 0, 0]))
        assert not ineq.holds(np.array([4.0, 0, 0]))

    def test_chained_sugar_expands_to_two(self):
        ineqs = parse_inequality("5.5 < x1 < 12.7", SCHEMA3)
        assert len(ineqs) == 2
        inside = np.array([0.0, 6.0, 0.0])
        outside_lo = np.array([0.0, 5.0, 0.0])
        outside_hi = np.array([0.0, 13.0, 0.0])
        assert all(i.holds(inside) for i in ineqs)
        assert not all(i.holds(outside_lo) for i in ineqs)
        assert not all(i.holds(outside_hi) for i in ineqs)

    def test_mirrored_number_on_left(self):
        (ineq,) = parse_inequality("5 < x0", SCHEMA3)
        assert ineq.holds(np.array([6.0, 0, 0]))

    def test_unknown_signal(self):
        with pytest.raises(tk.TwinError):
            parse_inequality("nope < 1", SCHEMA3)

    @pytest.mark.parametrize("bad", ["x0", "x0 < x1 < 2", "1 < 2", "x0 << 3", "3 > x0 > 1"])
    def test_malformed(self, bad):
        with pytest.raises(ParseError):
            parse_inequality(bad, SCHEMA3)


class TestEvents:
    def test_define_and_query(self):
        model = CausalModel(SCHEMA3)
        eid = model.define_event_text("x1 < 5", "low_x1")
        assert model.events[eid].name == "low_x1"
        # forced sign change
        assert model.get_event([0, 3, 0], [0, 7, 0]) == [eid]

    def test_zero_coefficients(self):
        with pytest.raises(ZeroCoefficientVector):
            LinearInequality(np.zeros(3), 1.0)

    def test_no_motion_no_crossing(self):
        model = CausalModel(SCHEMA3)
        model.define_event_text("x1 < 5")
        x = np.array([1.0, 2.0, 3.0])
        assert model.get_event(x, x) == []

    def test_incomplete_vector(self):
        model = CausalModel(SCHEMA3)
        model.define_event_text("x1 < 5")
        with pytest.raises(IncompleteVector):
            model.get_event([0, np.nan, 0], [1, 1, 1])

    def test_boundary_counts_as_outside(self):
        model = CausalModel(SCHEMA3)
        eid = model.define_event_text("x0 < 5")
        #从 boundary (outside) into the halfspace: membership changes
        assert model.get_event([5.0, 0, 0], [4.0, 0, 0]) == [eid]
        # boundary to outside: no membership change
        assert model.get_event([5.0, 0, 0], [6.0, 0, 0]) == []

    @given(finite_vec, finite_vec)
    @settings(max_examples=80, deadline=None)
    def test_symmetry_and_self(self, x, xp):
        model = CausalModel(SCHEMA3)
        model.define_event_text("x0 + -1*x1 < 2")
        model.define_event_text("3*x2 > 1")
        assert model.get_event(x, xp) == model.get_event(xp, x)
        assert model.get_event(x, x) == []

    def test_dense_sampling_oracle(self):
        # random halfspace + endpoints; exclude boundary-band cases
        rng = np.random.default_rng(1234)
        model = CausalModel(SCHEMA3)
        checked = 0
        while checked < 300:
            f = rng.uniform(-2, 2, size=3)
            if not np.any(f):
                continue
            c = float(rng.uniform(-3, 3))
            x = rng.uniform(-4, 4, size=3)
            xp = rng.uniform(-4, 4, size=3)
            if segment_near_boundary(f, c, x, xp, steps=1000):
                continue
            model.events.clear()
            eid = model.define_event(LinearInequality(f, c))
            expected = segment_crossing_dense(f, c, x, xp, steps=1000)
            assert (model.get_event(x, xp) == [eid]) == expected
            checked += 1


class TestConcepts:
    def test_membership(self):
        model = CausalModel(SCHEMA3)
        cid = model.define_concept_text(["x0 < 5", "-x0 < 0"], "x0_in_0_5")
        assert model.concept_contains(cid, [3.0, 0, 0])
        assert not model.concept_contains(cid, [6.0, 0, 0])
        assert not model.concept_contains(cid, [0.0, 0, 0])  # boundary outside

    def test_empty_region(self):
        model = CausalModel(SCHEMA3)
        with pytest.raises(EmptyRegion):
            model.define_concept([], "empty")

    def test_no_concepts_defined(self):
        model = CausalModel(SCHEMA3)
        assert model.get_concepts([0.0, 0, 0]) == []

    def test_overlapping_concepts(self):
        model = CausalModel(SCHEMA3)
        a = model.define_concept_text(["x0 < 10"], "a")
        b = model.define_concept_text(["x0 < 20"], "b")
        assert model.get_concepts([5.0, 0, 0]) == [a, b]

    def test_unknown_concept(self):
        model = CausalModel(SCHEMA3)
        with pytest.raises(UnknownConcept):
            model.concept_contains("s99", [0.0, 0, 0])

    def test_bruteforce_oracle(self):
        rng = np.random.default_rng(99)
        for _ in range(100):
            model = CausalModel(SCHEMA3)
            regions = []
            for _ in range(rng.integers(1, 5)):
                ineqs = []
                for _ in range(rng.integers(1, 4)):
                    f = rng.uniform(-2, 2, size=3)
                    while not np.any(f):
                        f = rng.uniform(-2, 2, size=3)
                    ineqs.append((list(f), float(rng.uniform(-3, 3))))
                regions.append(ineqs)
                model.define_concept([LinearInequality(np.array(f), c) for f, c in ineqs])
            for _ in range(5):
                x = rng.uniform(-4, 4, size=3)
                expected = [
                    f"s{i}" for i, region in enumerate(regions)
                    if concept_member_bruteforce(region, x)
                ]
                assert model.get_concepts(x) == expected

    @given(finite_vec, finite_vec)
    @settings(max_examples=60, deadline=None)
    def test_convexity_midpoint(self, x, xp):
        model = CausalModel(SCHEMA3)
        cid = model.define_concept_text(["-10 < x0 < 10", "x1 + x2 < 50"])
        if model.concept_contains(cid, x) and model.concept_contains(cid, xp):
            assert model.concept_contains(cid, (x + xp) / 2.0)


class TestSystemCausalities:
    def make_model(self):
        model = CausalModel(SCHEMA3)
        s = model.define_concept_text(["x0 < 1"], "s")
        s2 = model.define_concept_text(["x0 < 2"], "s2")
        s3 = model.define_concept_text(["x0 < 3"], "s3")
        return model, s, s2, s3

    def test_add_and_filter_by_start(self):
        model, s, s2, s3 = self.make_model()
        a = model.add_system_causality(s, s2, name="A")
        model.add_system_causality(s2, s3, name="B")
        got = model.get_system_causalities(s)
        assert [sc.id for sc in got] == [a]
        assert got[0].name == "A"

    def test_no_outgoing(self):
        model, s, s2, s3 = self.make_model()
        model.add_system_causality(s, s2)
        assert model.get_system_causalities(s3) == []

    def test_dangling_reference(self):
        model, s, s2, _ = self.make_model()
        with pytest.raises(DanglingReference):
            model.add_system_causality(s, "s99")
        with pytest.raises(DanglingReference):
            model.add_system_causality(s, s2, event="e9")

    def test_empty_event_stored(self):
        model, s, s2, _ = self.make_model()
        cid = model.add_system_causality(s, s2, event=None)
        (got,) = model.get_system_causalities(s)
        assert got.id == cid and got.event is None

    def test_tank_filling_to_full(self):
        # t0-filling -> t0-full on the level crossing its maximum
        topo, _ = fault_free_steady("4_tanks")
        schema = topo.schema()
        model = CausalModel(schema, known_components={c.id for c in topo.components()})
        filling = model.define_concept_text(["0.0 < t0_level < 1.9"], "t0-filling")
        full = model.define_concept_text(["t0_level > 1.9"], "t0-full")
        ev = model.define_event_text("t0_level > 1.9", "t0-crosses-max")
        model.add_system_causality(filling, full, event=ev, ok={"t0", "v0"}, name="t0 fills up")
        (got,) = model.get_system_causalities(filling)
        assert got.ok == frozenset({"t0", "v0"})
        assert got.s2 == full
        with pytest.raises(DanglingReference):
            model.add_system_causality(filling, full, ok={"not_a_component"})


class TestProductCausalities:
    def make_model(self):
        model = CausalModel(SCHEMA3)
        for pid in ("raw", "blank", "part"):
            model.define_product(pid)
        return model

    def test_consuming_query(self):
        model = self.make_model()
        qid = model.add_product_causality(parse_multiset("raw"), parse_multiset("blank"), name="cut")
        assert [pc.id for pc in model.get_product_causalities("raw")] == [qid]

    def test_not_consumed(self):
        model = self.make_model()
        model.add_product_causality(parse_multiset("raw"), parse_multiset("blank"))
        assert model.get_product_causalities("part") == []

    def test_two_consumers_insertion_order(self):
        model = self.make_model()
        a = model.add_product_causality(parse_multiset("raw"), parse_multiset("blank"))
        b = model.add_product_causality(parse_multiset("raw:2"), parse_multiset("part"))
        assert [pc.id for pc in model.get_product_causalities("raw")] == [a, b]

    def test_unknown_product(self):
        model = self.make_model()
        with pytest.raises(UnknownProduct):
            model.get_product_causalities("widget")
        with pytest.raises(DanglingReference):
            model.add_product_causality(parse_multiset("widget"), parse_multiset("blank"))

    def test_empty_inputs_rejected(self):
        model = self.make_model()
        with pytest.raises(DanglingReference):
            model.add_product_causality(parse_multiset(""), parse_multiset("blank"))


class TestModelFile:
    def test_load_round_trip(self):
        text = """
        # comment
        event hot : x0 > 7
        concept warm : 2 < x0 < 7 ; x1 < 50
        causality heats : warm -> warm on hot ok c1,c2 meta p=0.9,source=spec
        object raw
        object blank
        step cut : raw:2 => blank on hot ok c1
        bind is_warm : warm
        """
        loaded = load_model_text(text, SCHEMA3, known_components={"c1", "c2"})
        model = loaded.model
        assert set(loaded.event_ids) == {"hot"}
        assert set(loaded.concept_ids) == {"warm"}
        assert loaded.bindings == {"is_warm": loaded.concept_ids["warm"]}
        (sc,) = model.list_system_causalities()
        assert sc.ok == frozenset({"c1", "c2"})
        assert dict(sc.info) == {"p": "0.9", "source": "spec"}
        (pc,) = model.list_product_causalities()
        assert pc.p1.as_dict() == {"raw": 2}

    def test_parse_error_carries_line(self):
        with pytest.raises(ParseError) as err:
            load_model_text("event broken x0 < 1", SCHEMA3)
        assert err.value.line == 1

    def test_unknown_reference(self):
        with pytest.raises(DanglingReference):
            load_model_text("causality c : a -> b", SCHEMA3)
        with pytest.raises(DanglingReference):
            load_model_text("concept a : x0 < 1\nbind p : nope", SCHEMA3)


class TestConsistencyMonitor:
    def test_no_causalities_empty_report(self, runs):
        run = runs.run("4_tanks_stable")
        model = CausalModel(run.store.schema)
        report = check_state_consistency(run.store, model, 100.0)
        assert report.entries == []

    def test_fault_free_zero_mismatches(self):
        # noiseless run against the generated band-sustain causalities
        sc = tk.Scenario(config="4_tanks", duration=600.0, seed=2, noise_sigma=0.0)
        run = tk.run_full(sc)
        topo, steady = fault_free_steady("4_tanks")
        loaded = load_model_text(model_text(topo, signal_bands(topo, steady)), run.store.schema)
        mismatches = []
        for t in run.store.times()[1:]:
            report = check_state_consistency(run.store, loaded.model, float(t))
            mismatches.extend(report.mismatches)
        assert mismatches == []

    def test_v0_block_flagged_within_60s(self):
        onset = 300.0
        sc = tk.Scenario(
            config="4_tanks", duration=600.0, seed=2, noise_sigma=0.0,
            faults=(tk.Fault("v0", "valveBlock", onset),),
        )
        run = tk.run_full(sc)
        topo, steady = fault_free_steady("4_tanks")
        loaded = load_model_text(model_text(topo, signal_bands(topo, steady)), run.store.schema)
        first = None
        for t in run.store.times()[1:]:
            report = check_state_consistency(run.store, loaded.model, float(t))
            if report.mismatches:
                first = report
                break
        assert first is not None and onset < first.t <= onset + 60.0
        names = {e.name for e in first.mismatches}
        assert "t0_band_sustain" in names
        assert "v0" in first.suspect_components()

    def test_failed_guard_retracts_causality(self):
        sc = tk.Scenario(
            config="4_tanks", duration=600.0, seed=2, noise_sigma=0.0,
            faults=(tk.Fault("v0", "valveBlock", 300.0),),
        )
        run = tk.run_full(sc)
        topo, steady = fault_free_steady("4_tanks")
        loaded = load_model_text(model_text(topo, signal_bands(topo, steady)), run.store.schema)
        t_flag = next(
            t for t in run.store.times()[1:]
            if check_state_consistency(run.store, loaded.model, float(t)).mismatches
        )
        with_guard = check_state_consistency(run.store, loaded.model, float(t_flag))
        assert any(e.name == "t0_band_sustain" for e in with_guard.mismatches)
        retracted = check_state_consistency(run.store, loaded.model, float(t_flag), failed={"v0"})
        assert not any(e.name == "t0_band_sustain" for e in retracted.entries)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from followbot.recognition import (
    InitialisationError,
    KnnModel,
    Phase,
    RecognitionState,
    RecognizerError,
    drift_radius,
    following_step,
    gate_detection,
    knn_classify,
    load_negative_pool,
    run_initialisation,
    save_negative_pool,
)
from followbot.world import Detection

from oracles import brute_knn

pos_floats = st.floats(0.0, 1e3, allow_nan=False)


def det(bbox, embedding, truth="x", t=0.0):
    return Detection(
        timestamp=t,
        bbox=bbox,
        centroid_c=(0.0, 0.0, 2.0),
        embedding=np.asarray(embedding, dtype=float),
        agent_truth=truth,
    )


class TestDriftRadius:
    def test_zero_time_zero_radius(self):
        assert drift_radius(0.0, 640.0, 0.05) == 0.0

    def test_direct_evaluation(self):
        assert drift_radius(2.0, 100.0, 0.05) == pytest.approx(0.1)
        assert drift_radius(1.0, 200.0, 0.05) == pytest.approx(0.2)

    @given(pos_floats, st.floats(1.0, 2000.0), st.floats(1e-6, 10.0))
    def test_matches_formula_exactly(self, t, w, s):
        assert drift_radius(t, w, s) == t * s * (w / 100.0) ** 2

    @given(pos_floats, pos_floats, st.floats(1.0, 2000.0), st.floats(1e-6, 10.0))
    @settings(max_examples=100)
    def test_monotone_in_time(self, t, dt, w, s):
        assert drift_radius(t + dt, w, s) >= drift_radius(t, w, s)

    @given(pos_floats, st.floats(1.0, 2000.0), st.floats(0.0, 500.0), st.floats(1e-6, 10.0))
    @settings(max_examples=100)
    def test_monotone_in_width(self, t, w, dw, s):
        assert drift_radius(t, w + dw, s) >= drift_radius(t, w, s)


class TestGate:
    def state(self, w=100.0):
        return RecognitionState(
            phase=Phase.FOLLOWING,
            last_bbox=(300.0 - w / 2, 200.0, w, 150.0),
            last_detection_time=0.0,
        )

    def test_same_centroid_accepted(self):
        st_ = self.state()
        assert gate_detection(st_.last_bbox, st_, now=1.0, s=0.05)

    def test_far_candidate_rejected(self):
        st_ = self.state(w=100.0)
        # radius after 2 s is 0.1 px; a candidate 50 px away must fail
        cand = (350.0 - 50.0, 200.0 + 50.0, 100.0, 150.0)
        assert not gate_detection(cand, st_, now=2.0, s=0.05)

    def test_reappearing_target_accepted_after_long_gap(self):
        # The circle grows with elapsed time: the same 50 px offset that is
        # rejected immediately is accepted once enough time has passed.
        st_ = self.state(w=100.0)
        cand = (st_.last_bbox[0] + 50.0, st_.last_bbox[1], 100.0, 150.0)
        assert not gate_detection(cand, st_, now=0.01, s=50.0)
        assert gate_detection(cand, st_, now=2.0, s=50.0)

    def test_reference_overrides_last_bbox(self):
        st_ = self.state(w=100.0)
        cand = (1000.0, 800.0, 100.0, 150.0)
        ref = (1050.0, 875.0)
        assert gate_detection(cand, st_, now=2.0, s=50.0, reference=ref)

    def test_requires_previous_bbox(self):
        st_ = RecognitionState(phase=Phase.FOLLOWING, last_bbox=None)
        with pytest.raises(RecognizerError):
            gate_detection((0, 0, 10, 10), st_, now=1.0, s=0.05)


class TestKnn:
    def test_exact_positive_match(self):
        model = KnnModel(k=1)
        model.add_positive([1.0, 2.0])
        model.add_negative([50.0, 50.0])
        is_leader, margin = knn_classify([1.0, 2.0], model)
        assert is_leader
        assert margin == pytest.approx(0.5)

    def test_negative_centroid(self):
        model = KnnModel(k=3)
        for p in ([10.0, 10.0], [11.0, 11.0]):
            model.add_positive(p)
        for n in ([0.0, 1.0], [1.0, -1.0], [-1.0, 0.0]):
            model.add_negative(n)
        is_leader, margin = knn_classify([0.0, 0.0], model)
        assert not is_leader
        assert margin == pytest.approx((0 - 1.5) / 3)

    def test_tie_break_prefers_older_point(self):
        model = KnnModel(k=1)
        model.add_positive([1.0, 0.0])
        model.add_negative([-1.0, 0.0])  # same distance from the query
        is_leader, _ = knn_classify([0.0, 0.0], model)
        assert is_leader  # positive was inserted first

    def test_requires_points_and_valid_k(self):
        with pytest.raises(ValueError):
            KnnModel(k=4)
        model = KnnModel(k=3)
        with pytest.raises(RecognizerError):
            knn_classify([0.0], model)
        model.add_positive([0.0])
        with pytest.raises(RecognizerError):
            knn_classify([0.0], model)

    def test_negative_ring_buffer_caps(self):
        model = KnnModel(k=1, negative_cap=5)
        for i in range(9):
            model.add_negative([float(i)])
        assert len(model.negatives) == 5
        assert model.negatives[0][0] == 4.0

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(17)
        model = KnnModel(k=5)
        for _ in range(40):
            model.add_positive(rng.normal(size=16) + 10.0)
        for _ in range(40):
            model.add_negative(rng.normal(size=16) - 10.0)
        points = model.positives + model.negatives
        labels = [1] * 40 + [0] * 40
        orders = model._pos_order + model._neg_order
        for _ in range(1000):
            q = rng.normal(scale=12.0, size=16)
            votes = brute_knn(q, points, labels, orders, 5)
            is_leader, margin = knn_classify(q, model)
            assert is_leader == (votes * 2 > 5)
            assert margin == pytest.approx((votes - 2.5) / 5)


class TestInitialisation:
    def frames(self, n=20, two_agents=False):
        out = []
        for i in range(n):
            frame = [det((0, 0, 100.0, 150.0), [1.0, 0.0], truth="leader")]
            if two_agents:
                # farther agent projects to a smaller box
                frame.append(det((300, 0, 60.0, 90.0), [0.0, 1.0], truth="other"))
            out.append(frame)
        return out

    def test_positive_per_frame(self):
        pool = [np.zeros(2)] * 10
        model = run_initialisation(self.frames(), pool, np.random.default_rng(0))
        assert len(model.positives) == 20
        assert len(model.negatives) == 20

    def test_largest_box_is_the_leader(self):
        pool = [np.zeros(2)] * 10
        model = run_initialisation(
            self.frames(two_agents=True), pool, np.random.default_rng(0)
        )
        for p in model.positives:
            assert p[0] == 1.0 and p[1] == 0.0

    def test_empty_pool_rejected(self):
        with pytest.raises(InitialisationError):
            run_initialisation(self.frames(), [], np.random.default_rng(0))

    def test_insufficient_detections_rejected(self):
        frames = self.frames(4) + [[]] * 16
        with pytest.raises(InitialisationError):
            run_initialisation(frames, [np.zeros(2)], np.random.default_rng(0))

    def test_balanced_class_sizes(self):
        frames = self.frames(11) + [[]] * 2
        pool = [np.ones(2)] * 3
        model = run_initialisation(frames, pool, np.random.default_rng(0))
        assert len(model.positives) == len(model.negatives) == 11


class TestFollowingStep:
    def model(self):
        model = KnnModel(k=3)
        rng = np.random.default_rng(2)
        for _ in range(10):
            model.add_positive(rng.normal(0.0, 0.05, size=4) + [5, 0, 0, 0])
        for _ in range(10):
            model.add_negative(rng.normal(0.0, 0.05, size=4) - [5, 0, 0, 0])
        return model

    def state(self):
        return RecognitionState(
            phase=Phase.FOLLOWING, last_bbox=(100, 100, 100, 150), last_detection_time=0.0
        )

    def test_single_match_extends_positives(self):
        model = self.model()
        state = self.state()
        d = det((105, 100, 100, 150), [5.0, 0.0, 0.0, 0.0], truth="leader")
        before = len(model.positives)
        out = following_step([d], state, model, now=1.0, s=50.0)
        assert out is d
        assert len(model.positives) == before + 1
        assert state.last_bbox == d.bbox
        assert state.last_detection_time == 1.0

    def test_distractor_only_returns_absent(self):
        model = self.model()
        state = self.state()
        d = det((105, 100, 100, 150), [-5.0, 0.0, 0.0, 0.0], truth="other")
        before_neg = len(model.negatives)
        out = following_step([d], state, model, now=1.0, s=50.0)
        assert out is None
        assert len(model.negatives) == before_neg + 1

    def test_larger_margin_wins(self):
        model = KnnModel(k=5)
        for _ in range(5):
            model.add_positive([0.0, 0.0])
        for _ in range(3):
            model.add_positive([10.0, 10.0])
        model.add_negative([10.5, 10.5])
        model.add_negative([10.6, 10.4])
        for _ in range(3):
            model.add_negative([50.0, 50.0])
        state = self.state()
        strong = det((100, 100, 100, 150), [0.0, 0.0], truth="strong")
        weak = det((120, 100, 100, 150), [10.0, 10.0], truth="weak")
        out = following_step([weak, strong], state, model, now=1.0, s=1000.0)
        assert out is strong

    def test_gated_out_detection_never_mutates_model(self):
        model = self.model()
        state = self.state()
        sizes = (len(model.positives), len(model.negatives))
        far = det((3000, 3000, 100, 150), [-5.0, 0.0, 0.0, 0.0])
        out = following_step([far], state, model, now=0.001, s=0.05)
        assert out is None
        assert (len(model.positives), len(model.negatives)) == sizes

    def test_requires_following_phase(self):
        model = self.model()
        state = RecognitionState(phase=Phase.INITIALISING, last_bbox=(0, 0, 1, 1))
        with pytest.raises(RecognizerError):
            following_step([], state, model, now=0.0, s=0.05)


class TestPoolIO:
    def test_round_trip(self, tmp_path):
        pool = [np.arange(4, dtype=float), np.ones(4)]
        path = tmp_path / "pool.jsonl"
        save_negative_pool(path, pool)
        loaded = load_negative_pool(path)
        assert len(loaded) == 2
        assert np.array_equal(loaded[0], pool[0])
        assert np.array_equal(loaded[1], pool[1])

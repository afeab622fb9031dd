import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chromamix import evalmetrics as em
from chromamix.errors import EmptyEvaluationError, ShapeError, UndefinedReferenceError
from chromamix.evalmetrics import LossWeights

SR = 16000


def noise(seconds, seed=0):
    return np.random.default_rng(seed).normal(size=int(seconds * SR))


def scaled_by_segment(ref, alphas, seg_s=10.0):
    """Estimate equal to alpha_k * ref inside segment k, so its SDR is -20 log10|1 - alpha_k|."""
    n = int(seg_s * SR)
    est = ref.copy()
    for k, a in enumerate(alphas):
        est[k * n : (k + 1) * n] *= a
    return est


class TestSdr:
    def test_perfect_hits_cap(self):
        x = noise(1)
        assert em.sdr(x, x) == 100.0

    def test_half_amplitude(self):
        x = noise(1)
        assert em.sdr(x, 0.5 * x) == pytest.approx(6.020599913279624, abs=1e-6)

    def test_zero_estimate(self):
        x = noise(1)
        assert em.sdr(x, np.zeros_like(x)) == pytest.approx(0.0, abs=1e-12)

    def test_errors(self):
        with pytest.raises(UndefinedReferenceError):
            em.sdr(np.zeros(10), np.ones(10))
        with pytest.raises(ShapeError):
            em.sdr(np.ones(10), np.ones(11))

    @settings(max_examples=50)
    @given(st.floats(-3, 3).filter(lambda a: abs(1 - a) > 1e-3))
    def test_scale_closed_form(self, alpha):
        x = noise(0.25, 4)
        assert em.sdr(x, alpha * x) == pytest.approx(-10 * math.log10((1 - alpha) ** 2), abs=1e-9)


class TestEvaluateSeparation:
    def test_perfect_three_songs(self):
        refs = {f"s{i}": (noise(20, i), noise(20, 10 + i)) for i in range(3)}
        r = em.evaluate_separation(refs, refs)
        assert r.corpus == {"vocal": 100.0, "accompaniment": 100.0}
        assert r.mean_of_sources == 100.0

    def test_thirty_second_song_median(self):
        v, a = noise(30, 1), noise(30, 2)
        est_v = scaled_by_segment(v, [0.5, 0.5, 0.0])
        r = em.evaluate_separation({"s": (v, a)}, {"s": (est_v, a)})
        sdrs = [row["vocal"] for row in r.per_segment["s"]]
        np.testing.assert_allclose(sdrs, [6.0206, 6.0206, 0.0], atol=1e-4)
        assert r.per_song["s"]["vocal"] == pytest.approx(6.0206, abs=1e-4)

    def test_three_song_median_of_medians(self):
        # per-segment SDRs: A (6.0206, 6.0206, 0) -> 6.0206; B (20, 0) -> 10;
        # C (12.0412) -> 12.0412; corpus median -> 10
        alphas = {"A": [0.5, 0.5, 0.0], "B": [0.9, 0.0], "C": [0.75]}
        refs, ests = {}, {}
        for i, (sid, al) in enumerate(alphas.items()):
            v, a = noise(10 * len(al), 2 * i), noise(10 * len(al), 2 * i + 1)
            refs[sid] = (v, a)
            ests[sid] = (scaled_by_segment(v, al), scaled_by_segment(a, [0.5] * len(al)))
        r = em.evaluate_separation(refs, ests)
        assert r.per_song["A"]["vocal"] == pytest.approx(6.020599913, abs=1e-6)
        assert r.per_song["B"]["vocal"] == pytest.approx(10.0, abs=1e-6)
        assert r.per_song["C"]["vocal"] == pytest.approx(12.041199827, abs=1e-6)
        assert r.corpus["vocal"] == pytest.approx(10.0, abs=1e-6)
        assert r.corpus["accompaniment"] == pytest.approx(6.020599913, abs=1e-6)
        assert r.mean_of_sources == pytest.approx((10.0 + 6.020599913) / 2, abs=1e-6)

    def test_partial_segment_dropped(self):
        refs = {f"s{i}": (noise(25, i), noise(25, 5 + i)) for i in range(2)}
        r = em.evaluate_separation(refs, refs)
        assert all(len(rows) == 2 for rows in r.per_segment.values())

    def test_silent_reference_skipped(self):
        v = noise(20, 1)
        v[: 10 * SR] = 0.0
        a = noise(20, 2)
        r = em.evaluate_separation({"s": (v, a)}, {"s": (0.5 * v, a)})
        assert r.per_segment["s"][0]["vocal"] is None
        assert r.per_song["s"]["vocal"] == pytest.approx(6.0206, abs=1e-4)
        assert r.skipped == {"s": [{"index": 0, "source": "vocal"}]}

    def test_no_complete_segment(self):
        refs = {"s": (noise(5), noise(5, 1))}
        with pytest.raises(EmptyEvaluationError):
            em.evaluate_separation(refs, refs)
        with pytest.raises(EmptyEvaluationError):
            em.evaluate_separation({}, {})

    def test_permutation_invariance(self):
        rng = np.random.default_rng(0)
        refs, ests = {}, {}
        for i in range(5):
            v, a = noise(30, i), noise(30, 10 + i)
            refs[f"s{i}"] = (v, a)
            ests[f"s{i}"] = (scaled_by_segment(v, rng.uniform(0, 1, 3)), a * 0.8)
        base = em.evaluate_separation(refs, ests).corpus
        keys = list(refs)[::-1]
        perm = em.evaluate_separation({k: refs[k] for k in keys}, {k: ests[k] for k in keys})
        assert perm.corpus == base

    def test_report_serialization(self):
        refs = {"s": (noise(10), noise(10, 1))}
        r = em.evaluate_separation(refs, {"s": (refs["s"][0] * 0.5, refs["s"][1])})
        import json

        assert json.loads(r.to_json())["corpus"]["accompaniment"] == 100.0
        assert r.table().splitlines()[0] == "Experiment | SDR (V) | SDR (A) | Mean"
        assert "6.02 | 100.00 | 53.01" in r.table()


class TestLosses:
    def test_identical_is_zero(self):
        x = noise(1)
        assert em.source_loss(x, x) == 0.0

    def test_waveform_only(self):
        w = LossWeights(lambda_spec=0.0)
        assert em.source_loss(np.ones(SR), np.zeros(SR), w) == 1.0

    def test_spectral_sign_flip(self):
        x = noise(1, 3)
        assert em.source_loss(x, -x, LossWeights(lambda_audio=0.0)) <= 1e-9

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            em.source_loss(np.ones(10), np.ones(12))

    def test_combination(self):
        assert em.combine_losses(0.3, 0.5) == 0.8
        assert em.combine_losses(0.3, 0.5, LossWeights(lambda_voc=2.0, lambda_acc=0.0)) == 0.6

    def test_total_perfect(self):
        v, a = noise(1), noise(1, 1)
        assert em.total_loss((v, v), (a, a)) == 0.0

    def test_total_is_linear(self):
        v, a = noise(1), noise(1, 1)
        lv = em.source_loss(v, 0.5 * v)
        la = em.source_loss(a, 0.2 * a)
        w = LossWeights(lambda_voc=1.5, lambda_acc=0.25)
        assert em.total_loss((v, 0.5 * v), (a, 0.2 * a), w) == 1.5 * lv + 0.25 * la

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0, 2))
    def test_nonnegative(self, seed, scale):
        x = noise(0.1, seed)
        y = noise(0.1, seed + 1) * scale
        assert em.source_loss(x, y) >= 0

    def test_zero_iff_equal(self):
        x = noise(0.1)
        y = x.copy()
        y[5] += 1e-3
        assert em.source_loss(x, y, LossWeights(lambda_spec=0.0)) > 0

    def test_negative_weight(self):
        with pytest.raises(ValueError):
            LossWeights(lambda_voc=-1)

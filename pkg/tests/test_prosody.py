import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import SR, buf, planned_utterance
from hadid.errors import TooFewSegments, UnusableUtterance
from hadid.pitch import PitchTrack
from hadid.prosody import (FEATURE_NAMES, FeatureTable, FeatureVector, analyze_utterance,
                           extract_features,
                           intonation_metrics, rhythm_metrics)
from hadid.segmentation import C, V, NucleusList, SegmentTrack


def _track(v_ms, c_ms, T=None):
    """Alternating track from interval lists; ``len(c)`` may be ``len(v) - 1 .. len(v) + 1``.

    With more C than V intervals the track starts with C, otherwise with V.
    """
    first, second = (c_ms, v_ms) if len(c_ms) > len(v_ms) else (v_ms, c_ms)
    k1, k2 = (C, V) if len(c_ms) > len(v_ms) else (V, C)
    order = []
    for i in range(len(first)):
        order.append((k1, first[i]))
        if i < len(second):
            order.append((k2, second[i]))
    segs, t = [], 0.0
    for k, ms in order:
        segs.append((t, t + ms / 1000.0, k))
        t += ms / 1000.0
    return SegmentTrack(segs, T if T is not None else t)


def _reference(v, c, T):
    """Plain-loop evaluation of the rhythm definitions."""
    mv, mc = sum(v) / len(v), sum(c) / len(c)
    dv, dc = statistics.pstdev(v), statistics.pstdev(c)
    rp = sum(abs(c[i + 1] - c[i]) for i in range(len(c) - 1)) / (len(c) - 1)
    npv = 100 * sum(abs(v[i + 1] - v[i]) / ((v[i + 1] + v[i]) / 2)
                    for i in range(len(v) - 1)) / (len(v) - 1)
    return dict(pct_v=100 * sum(v) / (1000 * T), delta_v=dv, delta_c=dc,
                varco_v=100 * dv / mv, varco_c=100 * dc / mc, rpvi_c=rp, npvi_v=npv,
                speech_rate=len(v) / T)


def test_worked_example():
    r = rhythm_metrics(_track([100, 150, 50], [80, 120], 0.5))
    assert r.pct_v == 60.0
    assert r.rpvi_c == 40.0
    assert r.npvi_v == 70.0
    assert r.delta_v == pytest.approx(40.824829, abs=1e-5)
    assert r.varco_v == pytest.approx(40.824829, abs=1e-5)
    assert r.delta_c == 20.0 and r.varco_c == 20.0
    assert r.speech_rate == 6.0


def test_equal_intervals_zero_variability():
    r = rhythm_metrics(_track([80] * 5, [60] * 5))
    assert r.delta_v == r.delta_c == r.rpvi_c == r.npvi_v == 0.0


def test_matches_reference_on_random_lists(rng):
    for _ in range(1000):
        n = int(rng.integers(2, 30))
        v = list(rng.uniform(20, 300, n))
        c = list(rng.uniform(20, 300, int(rng.integers(max(2, n - 1), n + 2))))
        T = (sum(v) + sum(c)) / 1000 + rng.uniform(0, 1)
        got = rhythm_metrics(_track(v, c, T)).__dict__
        want = _reference(v, c, T)
        for k in want:
            assert got[k] == pytest.approx(want[k], rel=1e-9, abs=1e-9), k


def test_too_few_segments():
    with pytest.raises(TooFewSegments):
        rhythm_metrics(_track([100], [50, 60]))
    with pytest.raises(TooFewSegments):
        rhythm_metrics(_track([100, 90], [50]))
    with pytest.raises(TooFewSegments):
        rhythm_metrics(_track([], [50]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(10, 500), min_size=3, max_size=20),
       st.lists(st.floats(10, 500), min_size=3, max_size=20))
def test_rhythm_ranges(v, c):
    c = c[:len(v) + 1]
    v = v[:len(c) + 1]
    r = rhythm_metrics(_track(v, c))
    assert 0 < r.pct_v <= 100
    assert r.npvi_v >= 0 and r.npvi_v <= 200
    assert r.delta_v >= 0 and r.rpvi_c >= 0


def _pitch(times, f0, hop=0.01):
    return PitchTrack(np.asarray(times, float), np.asarray(f0, float), hop, 75.0, 500.0,
                      np.ones(len(times)))


def test_flat_single_nucleus():
    t = np.arange(0, 1.0, 0.01)
    m = intonation_metrics(_pitch(t, np.full(t.size, 200.0)), NucleusList([(0.2, 0.6)], 1.0))
    assert m.pitch_bottom == m.pitch_median == m.pitch_top == 200.0
    assert m.pitch_range == 0.0 and m.traj_intra == 0.0 and m.traj_inter == 0.0


def test_octave_jump_between_nuclei():
    t = np.arange(0, 2.0, 0.01)
    f = np.where(t < 1.0, 100.0, 200.0)
    f[(t > 0.6) & (t < 1.2)] = np.nan
    m = intonation_metrics(_pitch(t, f), NucleusList([(0.2, 0.5), (1.3, 1.6)], 2.0))
    assert m.traj_inter == pytest.approx(6.0)
    assert m.traj_intra == 0.0


def test_percentiles_of_linear_values():
    f = np.linspace(100, 400, 101)
    t = np.arange(101) * 0.01
    m = intonation_metrics(_pitch(t, f), NucleusList([(0.0, 1.005)], 1.01))
    assert m.pitch_bottom == pytest.approx(106.0, abs=0.01)
    assert m.pitch_top == pytest.approx(394.0, abs=0.01)
    assert m.pitch_median == pytest.approx(250.0)
    assert m.pitch_range == pytest.approx(12 * math.log2(394 / 106), abs=1e-3)


def test_glide_intra_trajectory():
    # one nucleus gliding up one octave over 0.5 s in a 1 s utterance
    t = np.arange(0, 1.0, 0.01)
    f = 100 * 2 ** ((t - 0.2) / 0.5)
    m = intonation_metrics(_pitch(t, f), NucleusList([(0.195, 0.705)], 1.0))
    assert m.traj_intra == pytest.approx(12.0, rel=1e-9)


PLAN = [("C", 90), ("V", 100), ("C", 140), ("V", 130), ("C", 80), ("V", 70),
        ("C", 120), ("V", 110), ("C", 100)]


def test_planned_utterance_features():
    a, truth = planned_utterance(PLAN, f0=180.0, seed=2)
    ex = analyze_utterance(a)
    fv = ex.features
    v = [1000 * (e - s) for s, e, k in truth if k == V]
    c = [1000 * (e - s) for s, e, k in truth if k == C]
    # T is the trimmed duration; the 10 ms frame grid leaves a sliver of
    # the surrounding silence
    T = ex.audio.duration_s
    assert T == pytest.approx(truth[-1][1] - truth[0][0], abs=0.03)
    want = _reference(v, c, T)
    for name in ("pct_v", "speech_rate", "delta_v", "varco_v"):
        assert getattr(fv, name) == pytest.approx(want[name], rel=0.05), name
    assert fv.delta_c == pytest.approx(want["delta_c"], rel=0.05, abs=2.0)
    assert abs(12 * math.log2(fv.pitch_median / 180.0)) < 0.5
    assert fv.pitch_range < 0.5


def test_gain_invariance():
    a, _ = planned_utterance(PLAN, seed=4)
    f1 = extract_features(a).as_array()
    f2 = extract_features(buf(a.samples * 0.3)).as_array()
    assert np.allclose(f1, f2, rtol=1e-6, atol=0)


def test_silence_unusable():
    with pytest.raises(UnusableUtterance) as e:
        extract_features(buf(np.zeros(SR)))
    assert e.value.reason == "EmptyAfterTrim"


def test_feature_table_roundtrip(tmp_path, rng):
    X = rng.normal(size=(4, len(FEATURE_NAMES)))
    t = FeatureTable(["a", "b", "c", "d"], ["s1", "s1", "s2", "s2"], ["X", "X", "Y", "Y"], X)
    t.write_csv(tmp_path / "f.csv")
    back = FeatureTable.read_csv(tmp_path / "f.csv")
    assert np.array_equal(back.X, X)
    assert back.dialects == ["X", "X", "Y", "Y"]
    fv = FeatureVector.from_mapping(dict(zip(FEATURE_NAMES, X[0])))
    assert np.array_equal(fv.as_array(), X[0])

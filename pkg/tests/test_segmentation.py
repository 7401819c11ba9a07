import numpy as np
import pytest

from conftest import SR, buf, noise, planned_utterance, sawtooth, tone
from hadid.errors import DataError, NoNuclei
from hadid.pitch import estimate_pitch
from hadid.segmentation import (C, V, NucleusList, SegmentTrack, band_intensity,
                                coarse_cv_segment, detect_nuclei)


def _nuclei(a):
    return detect_nuclei(band_intensity(a), estimate_pitch(a))


def test_passband_tone_is_flat():
    c = band_intensity(buf(tone(1000, 1.0)))
    inner = c.db[5:-5]
    assert inner.max() - inner.min() <= 1.0


def test_stopband_attenuation():
    hi = band_intensity(buf(tone(1000, 1.0))).db[5:-5]
    lo = band_intensity(buf(tone(50, 1.0))).db[5:-5]
    assert lo.max() <= hi.min() - 20.0


def test_zero_signal_at_floor():
    c = band_intensity(buf(np.zeros(SR)))
    assert np.all(c.db == -120.0)


PLAN3 = [("C", 120), ("V", 110), ("C", 150), ("V", 90), ("C", 130), ("V", 140), ("C", 100)]


def test_three_bursts_three_nuclei():
    a, truth = planned_utterance(PLAN3)
    n = _nuclei(a)
    assert len(n) == 3
    true_v = [(s, e) for s, e, k in truth if k == V]
    for (s, e), (ts, te) in zip(n.nuclei, true_v):
        assert abs(s - ts) <= 0.010 + 1e-9
        assert abs(e - te) <= 0.010 + 1e-9


def test_three_bursts_vowel_durations():
    a, truth = planned_utterance(PLAN3, f0=140.0, seed=3)
    segs = coarse_cv_segment(_nuclei(a))
    got = segs.durations_ms(V)
    want = np.array([1000 * (e - s) for s, e, k in truth if k == V])
    assert np.all(np.abs(got - want) <= 15.0)


def test_noise_only_has_no_nuclei():
    assert len(_nuclei(buf(noise(1.0, rms=0.1)))) == 0


def test_single_long_vowel_one_nucleus():
    x = np.concatenate([np.zeros(4000), sawtooth(200, 0.5), np.zeros(4000)])
    assert len(_nuclei(buf(x))) == 1


def test_nuclei_respect_min_length():
    # a 25 ms vowel is shorter than the 40 ms minimum
    a, _ = planned_utterance([("C", 100), ("V", 25), ("C", 100)])
    assert len(_nuclei(a)) == 0


def test_coarse_segmentation_construction():
    n = NucleusList([(0.10, 0.25), (0.40, 0.55)], 0.70)
    s = coarse_cv_segment(n)
    want = [(0, 0.10, C), (0.10, 0.25, V), (0.25, 0.40, C), (0.40, 0.55, V), (0.55, 0.70, C)]
    assert len(s.segments) == 5
    for (a, b, k), (wa, wb, wk) in zip(s.segments, want):
        assert k == wk and a == pytest.approx(wa) and b == pytest.approx(wb)


def test_whole_utterance_nucleus():
    s = coarse_cv_segment(NucleusList([(0.0, 1.2)], 1.2))
    assert s.segments == ((0.0, 1.2, V),)
    assert s.durations_ms(C).size == 0


def test_short_edges_dropped():
    s = coarse_cv_segment(NucleusList([(0.02, 0.30), (0.40, 0.69)], 0.70))
    assert [k for *_, k in s.segments] == [V, C, V]


def test_no_nuclei_error():
    with pytest.raises(NoNuclei):
        coarse_cv_segment(NucleusList([], 1.0))


def test_segment_invariants():
    with pytest.raises(DataError):
        SegmentTrack([(0, 0.1, V), (0.1, 0.2, V)], 1.0)
    with pytest.raises(DataError):
        SegmentTrack([(0, 0.3, V), (0.2, 0.4, C)], 1.0)
    with pytest.raises(DataError):
        NucleusList([(0.5, 0.4)], 1.0)


def test_segments_alternate_and_cover_nuclei():
    a, _ = planned_utterance(PLAN3 * 2, seed=5)
    n = _nuclei(a)
    s = coarse_cv_segment(n)
    kinds = [k for *_, k in s.segments]
    assert all(x != y for x, y in zip(kinds, kinds[1:]))
    assert kinds.count(V) == len(n)

"""Syllable-nucleus detection and coarse consonant/vowel segmentation.

No phoneme recognition is involved: a nucleus is a loud, voiced stretch of
the band-passed intensity contour, every nucleus becomes a vowel (V)
interval and the gaps between nuclei become consonant (C) intervals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import sosfilt

from .audio_io import AudioBuffer, frame_rms, rms_to_db, _runs
from .errors import DataError, InvalidBand, NoNuclei
from .pitch import PitchTrack

V = "V"
C = "C"


@dataclass(frozen=True)
class IntensityContour:
    times: np.ndarray
    db: np.ndarray
    hop_s: float
    duration_s: float


@dataclass(frozen=True)
class NucleusList:
    nuclei: tuple
    utterance_duration_s: float

    def __post_init__(self):
        nuclei = tuple((float(s), float(e)) for s, e in self.nuclei)
        prev_end = 0.0
        for s, e in nuclei:
            if not e > s:
                raise DataError(f"nucleus ({s}, {e}) has non-positive length")
            if s < prev_end - 1e-12 or e > self.utterance_duration_s + 1e-9:
                raise DataError("nuclei must be sorted, disjoint and inside the utterance")
            prev_end = e
        object.__setattr__(self, "nuclei", nuclei)

    def __len__(self):
        return len(self.nuclei)

    def durations_ms(self):
        return np.round([1000.0 * (e - s) for s, e in self.nuclei], 10)


@dataclass(frozen=True)
class SegmentTrack:
    segments: tuple
    utterance_duration_s: float

    def __post_init__(self):
        segs = tuple((float(s), float(e), k) for s, e, k in self.segments)
        prev_end, prev_kind = 0.0, None
        for s, e, k in segs:
            if k not in (V, C):
                raise DataError(f"unknown segment kind {k!r}")
            if not e > s or s < prev_end - 1e-9 or e > self.utterance_duration_s + 1e-9:
                raise DataError("segments must be sorted, disjoint and inside the utterance")
            if k == prev_kind:
                raise DataError("adjacent segments must alternate between V and C")
            prev_end, prev_kind = e, k
        object.__setattr__(self, "segments", segs)

    def durations_ms(self, kind):
        # 0.1 ps rounding strips float noise from boundary subtraction
        return np.round([1000.0 * (e - s) for s, e, k in self.segments if k == kind], 10)

    def to_rows(self):
        return list(self.segments)


def _biquad_sos(kind, fc, sr, q=1.0 / math.sqrt(2.0)):
    """Second-order section for a Butterworth-Q low/high-pass (bilinear transform)."""
    w0 = 2.0 * math.pi * fc / sr
    cw, sw = math.cos(w0), math.sin(w0)
    alpha = sw / (2.0 * q)
    if kind == "lowpass":
        b = [(1 - cw) / 2, 1 - cw, (1 - cw) / 2]
    else:
        b = [(1 + cw) / 2, -(1 + cw), (1 + cw) / 2]
    a = [1 + alpha, -2 * cw, 1 - alpha]
    return [b[0] / a[0], b[1] / a[0], b[2] / a[0], 1.0, a[1] / a[0], a[2] / a[0]]


def bandpass(x, sr, low_hz, high_hz):
    """Band-pass ``x`` with a high-pass and a low-pass biquad in cascade.

    An edge at 0 Hz (or at Nyquist) drops the corresponding section.
    """
    if not 0 <= low_hz < high_hz <= sr / 2:
        raise InvalidBand(f"[{low_hz}, {high_hz}] Hz with sample rate {sr}")
    sos = []
    if low_hz > 0:
        sos.append(_biquad_sos("highpass", low_hz, sr))
    if high_hz < sr / 2:
        sos.append(_biquad_sos("lowpass", high_hz, sr))
    if not sos:
        return np.asarray(x, dtype=np.float64).copy()
    return sosfilt(np.array(sos), x)


def band_intensity(a: AudioBuffer, low_hz=300.0, high_hz=2500.0, *,
                   win_s=0.025, hop_s=0.010) -> IntensityContour:
    """Framewise RMS level (dBFS, floored at -120) of the band-passed signal.

    Frames are Hann-weighted so a steady vowel gives a flat contour.
    """
    y = bandpass(a.samples, a.sample_rate_hz, low_hz, high_hz)
    db = rms_to_db(frame_rms(y, a.sample_rate_hz, win_s, hop_s, window="hann"))
    return IntensityContour(np.arange(db.size) * hop_s, db, hop_s, a.duration_s)


def detect_nuclei(intensity: IntensityContour, pitch: PitchTrack, *,
                  peak_drop_db=3.0, min_nucleus_ms=40.0, merge_ms=60.0) -> NucleusList:
    """Find syllable nuclei.

    For every local intensity maximum on a voiced frame, the nucleus grows
    outwards while frames stay voiced and within ``peak_drop_db`` of that
    maximum. Nuclei whose peaks are less than ``merge_ms`` apart are fused;
    nuclei shorter than ``min_nucleus_ms`` are dropped. A nucleus spanning
    frames ``a..b`` covers ``[t_a - hop/2, t_b + hop/2]`` clipped to the
    utterance, except that an edge facing a voiced frame below the drop
    floor is placed at the interpolated floor crossing.
    """
    if abs(intensity.hop_s - pitch.hop_s) > 1e-12:
        raise DataError("intensity and pitch must share the frame hop")
    n = min(len(intensity.db), len(pitch.f0_hz))
    db = intensity.db[:n]
    voiced = pitch.voiced[:n]
    hop = intensity.hop_s
    duration = intensity.duration_s

    regions = []
    for start, stop in _runs(voiced):
        seg = db[start:stop]
        for lo, hi, pk in _scan(seg, 0, peak_drop_db):
            # a region grown from the shoulder of a neighbouring peak is not
            # a nucleus of its own
            if (pk > 0 and seg[pk - 1] > seg[pk]) or (pk + 1 < seg.size and seg[pk + 1] > seg[pk]):
                continue
            regions.append((start + lo, start + hi, start + pk))
    regions.sort()

    merged = []
    for lo, hi, pk in regions:
        if merged and (pk - merged[-1][2]) * hop * 1000.0 < merge_ms - 1e-9:
            plo, phi, ppk = merged[-1]
            keep_pk = ppk if db[ppk] >= db[pk] else pk
            merged[-1] = (plo, max(phi, hi), keep_pk)
        elif merged and lo <= merged[-1][1] + 1:
            plo, phi, ppk = merged[-1]
            merged[-1] = (plo, hi, ppk if db[ppk] >= db[pk] else pk)
        else:
            merged.append((lo, hi, pk))

    nuclei = []
    for lo, hi, pk in merged:
        # the steady level of the nucleus, not its ripple maximum, anchors the edges
        floor = float(np.median(db[lo:hi + 1])) - peak_drop_db
        s = max(0.0, (lo - _edge_frac(db, voiced, lo, -1, floor)) * hop)
        e = min(duration, (hi + _edge_frac(db, voiced, hi, 1, floor)) * hop)
        if (e - s) * 1000.0 >= min_nucleus_ms - 1e-9:
            nuclei.append((s, e))
    return NucleusList(tuple(nuclei), duration)


def _edge_frac(db, voiced, i, step, floor):
    """How far (in frames) past edge frame ``i`` the nucleus extends.

    When the neighbour is voiced but below ``floor`` the boundary sits
    where the contour crosses ``floor``, interpolated in power; with
    Hann-weighted power a frame centred on a step onset reads 3 dB down,
    so this lands on the onset for the default drop. Otherwise half a hop.
    """
    j = i + step
    if 0 <= j < db.size and voiced[j] and db[j] < floor < db[i]:
        # interpolate in power, where a windowed step rises almost linearly
        pi, pj, pf = 10.0 ** (db[i] / 10.0), 10.0 ** (db[j] / 10.0), 10.0 ** (floor / 10.0)
        return (pi - pf) / (pi - pj)
    return 0.5


def _scan(seg, offset, drop):
    """Peak regions of a frame range, scanned left to right."""
    out = []
    i = 0
    while i < seg.size:
        p = i + int(np.argmax(seg[i:]))
        floor = seg[p] - drop
        lo = p
        while lo > i and seg[lo - 1] >= floor:
            lo -= 1
        hi = p
        while hi + 1 < seg.size and seg[hi + 1] >= floor:
            hi += 1
        out.append((offset + lo, offset + hi, offset + p))
        if lo > i:
            out.extend(_scan(seg[i:lo], offset + i, drop))
        i = hi + 1
    return out


def coarse_cv_segment(n: NucleusList, *, edge_min_ms=30.0) -> SegmentTrack:
    """Turn nuclei into an alternating V/C segmentation.

    Gaps between nuclei become C segments. The stretch before the first and
    after the last nucleus becomes a C segment only when it lasts at least
    ``edge_min_ms``.
    """
    if len(n) == 0:
        raise NoNuclei("no syllable nuclei detected")
    T = n.utterance_duration_s
    segs = []
    first = n.nuclei[0][0]
    if first * 1000.0 >= edge_min_ms - 1e-9:
        segs.append((0.0, first, C))
    for i, (s, e) in enumerate(n.nuclei):
        if i > 0:
            prev_end = n.nuclei[i - 1][1]
            if s > prev_end:
                segs.append((prev_end, s, C))
            else:
                # touching nuclei cannot alternate; fuse them
                ps, _, _ = segs.pop()
                s = ps
        segs.append((s, e, V))
    last = n.nuclei[-1][1]
    if (T - last) * 1000.0 >= edge_min_ms - 1e-9:
        segs.append((last, T, C))
    return SegmentTrack(tuple(segs), T)

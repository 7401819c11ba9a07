"""Framewise F0 estimation by normalized autocorrelation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .audio_io import AudioBuffer, frame_signal
from .errors import (BandTooNarrow, BufferTooShort, DataError,
                     NonPositiveFrequency)

UNVOICED = float("nan")


@dataclass(frozen=True)
class PitchTrack:
    """F0 per frame; unvoiced frames hold ``UNVOICED`` (NaN).

    ``strength`` is the normalized autocorrelation at the chosen lag (0 for
    frames with no candidate).
    """

    times: np.ndarray
    f0_hz: np.ndarray
    hop_s: float
    f0_floor_hz: float
    f0_ceil_hz: float
    strength: np.ndarray = None

    @property
    def voiced(self) -> np.ndarray:
        return ~np.isnan(self.f0_hz)

    def __len__(self):
        return len(self.times)

    def to_rows(self):
        """(time_s, f0_hz or None) pairs, for CSV dumps."""
        return [(float(t), None if math.isnan(f) else float(f))
                for t, f in zip(self.times, self.f0_hz)]


def hz_to_semitones(f_hi, f_lo):
    """Interval from ``f_lo`` up to ``f_hi`` in semitones."""
    f_hi = np.asarray(f_hi, dtype=np.float64)
    f_lo = np.asarray(f_lo, dtype=np.float64)
    if np.any(f_hi <= 0) or np.any(f_lo <= 0):
        raise NonPositiveFrequency("frequencies must be positive")
    out = 12.0 * np.log2(f_hi / f_lo)
    return float(out) if out.ndim == 0 else out


def _nccf(frames, lag_max):
    """Normalized cross-correlation of each frame's head against its lags.

    Returns ``r`` of shape (n_frames, lag_max + 1) where
    ``r[:, k] = <a, f[k:k+L]> / sqrt(|a|^2 |f[k:k+L]|^2)`` with ``a = f[:L]``
    and ``L = frame_len - lag_max``.
    """
    n_frames, win = frames.shape
    L = win - lag_max
    head = frames[:, :L]
    nfft = 1 << int(math.ceil(math.log2(win + L)))
    spec_full = np.fft.rfft(frames, nfft, axis=1)
    spec_head = np.fft.rfft(head, nfft, axis=1)
    corr = np.fft.irfft(spec_full * np.conj(spec_head), nfft, axis=1)[:, :lag_max + 1]
    csum = np.concatenate([np.zeros((n_frames, 1)), np.cumsum(frames ** 2, axis=1)], axis=1)
    lags = np.arange(lag_max + 1)
    e_lag = csum[:, lags + L] - csum[:, lags]
    e_head = e_lag[:, :1]
    denom = np.sqrt(e_head * e_lag)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(denom > 1e-20, corr / np.where(denom > 1e-20, denom, 1.0), 0.0)
    return r


def estimate_pitch(a: AudioBuffer, f0_floor_hz=75.0, f0_ceil_hz=500.0, *,
                   hop_s=0.010, win_s=0.040, voicing_threshold=0.45,
                   silence_db=-35.0, octave_cost=0.02) -> PitchTrack:
    """Estimate F0 every ``hop_s`` seconds.

    Each frame is a ``win_s`` window centered on ``i * hop_s`` (widened to
    three periods of ``f0_floor_hz`` when the floor is very low). The lag
    with the best normalized autocorrelation inside the search band wins,
    after a small per-octave penalty on longer lags; its position is
    refined by a parabola through the neighbouring lags. A frame is voiced
    when the winning correlation reaches ``voicing_threshold`` and the frame
    RMS is within ``silence_db`` of the loudest frame.
    """
    if f0_floor_hz <= 0 or f0_ceil_hz <= 0:
        raise NonPositiveFrequency("pitch band must be positive")
    if f0_ceil_hz <= f0_floor_hz or f0_ceil_hz / f0_floor_hz < 1.1:
        raise BandTooNarrow(f"[{f0_floor_hz}, {f0_ceil_hz}] Hz")
    sr = a.sample_rate_hz
    if f0_ceil_hz > sr / 4:
        raise DataError(f"f0 ceiling must be <= sample_rate/4 = {sr / 4} Hz")
    if a.samples.size < 2 * sr / f0_floor_hz:
        raise BufferTooShort(f"{a.samples.size} samples < two periods of {f0_floor_hz} Hz")

    lag_min = max(2, int(math.floor(sr / f0_ceil_hz)))
    lag_max = int(math.ceil(sr / f0_floor_hz)) + 1
    win_s = max(win_s, 3.0 / f0_floor_hz)
    frames = frame_signal(a.samples, sr, win_s, hop_s)
    frames = frames - frames.mean(axis=1, keepdims=True)
    r = _nccf(frames, lag_max)

    n_frames = frames.shape[0]
    lags = np.arange(lag_max + 1)
    band = (lags >= lag_min) & (lags < lag_max)
    inner = r[:, 1:-1]
    is_peak = (inner >= r[:, :-2]) & (inner > r[:, 2:]) & band[1:-1] & (inner > 0)
    score = np.where(is_peak, inner - octave_cost * np.log2(lags[1:-1] / lag_min), -np.inf)
    best = np.argmax(score, axis=1) + 1
    has_peak = np.isfinite(score[np.arange(n_frames), best - 1])

    rows = np.arange(n_frames)
    r0 = r[rows, best - 1]
    r1 = r[rows, best]
    r2 = r[rows, np.minimum(best + 1, lag_max)]
    curv = r0 - 2.0 * r1 + r2
    with np.errstate(invalid="ignore", divide="ignore"):
        shift = np.where(curv < 0, 0.5 * (r0 - r2) / curv, 0.0)
    shift = np.clip(np.nan_to_num(shift), -0.5, 0.5)
    peak_r = np.where(has_peak, r1 - 0.25 * (r0 - r2) * shift, 0.0)
    f0 = sr / (best + shift)
    f0 = np.clip(f0, f0_floor_hz, f0_ceil_hz)

    rms = np.sqrt(np.mean(frames ** 2, axis=1))
    peak_rms = rms.max()
    loud = rms > 0
    if peak_rms > 0:
        loud &= 20.0 * np.log10(np.maximum(rms, 1e-300) / peak_rms) >= silence_db
    voiced = has_peak & loud & (peak_r >= voicing_threshold)
    f0 = np.where(voiced, f0, UNVOICED)
    times = np.arange(n_frames) * hop_s
    return PitchTrack(times, f0, hop_s, float(f0_floor_hz), float(f0_ceil_hz),
                      np.where(has_peak, peak_r, 0.0))

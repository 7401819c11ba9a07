"""PCM-16 WAV input/output, framing helpers and energy-gate silence trimming."""
from __future__ import annotations

import os
import wave
from dataclasses import dataclass

import numpy as np

from .errors import (CorruptHeader, DataError, EmptyAfterTrim, MissingFile,
                     UnsupportedFormat)

MIN_SAMPLE_RATE = 8000
DB_FLOOR = -120.0


@dataclass(frozen=True)
class AudioBuffer:
    """Mono audio normalized to [-1, 1].

    The sample array is made read-only on construction so buffers can be
    shared freely.
    """

    samples: np.ndarray
    sample_rate_hz: int
    source_id: str = ""

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise DataError("AudioBuffer samples must be one-dimensional")
        if x.size == 0:
            raise DataError("AudioBuffer must contain at least one sample")
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > 1.0:
            raise DataError("AudioBuffer samples must lie within [-1, 1]")
        if int(self.sample_rate_hz) < MIN_SAMPLE_RATE:
            raise DataError(f"sample rate must be >= {MIN_SAMPLE_RATE} Hz")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def with_samples(self, samples) -> "AudioBuffer":
        return AudioBuffer(samples, self.sample_rate_hz, self.source_id)


def load_wav(path, source_id=None) -> AudioBuffer:
    """Read a 16-bit PCM WAV file (mono or stereo) into an :class:`AudioBuffer`.

    Stereo input is averaged to mono. Chunks other than ``fmt`` and ``data``
    are skipped.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise MissingFile(path)
    try:
        with wave.open(path, "rb") as w:
            n_channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            n_frames = w.getnframes()
            raw = w.readframes(n_frames)
    except wave.Error as exc:
        msg = str(exc)
        if "unknown format" in msg:
            raise UnsupportedFormat(f"{path}: {msg}") from exc
        raise CorruptHeader(f"{path}: {msg}") from exc
    except EOFError as exc:
        raise CorruptHeader(f"{path}: truncated header") from exc
    if width != 2:
        raise UnsupportedFormat(f"{path}: {8 * width}-bit samples, expected 16")
    if n_channels not in (1, 2):
        raise UnsupportedFormat(f"{path}: {n_channels} channels")
    data = np.frombuffer(raw, dtype="<i2")
    usable = (data.size // n_channels) * n_channels
    if usable == 0:
        raise CorruptHeader(f"{path}: no sample data")
    x = data[:usable].reshape(-1, n_channels).astype(np.float64) / 32768.0
    if n_channels == 2:
        x = x.mean(axis=1)
    else:
        x = x[:, 0]
    if source_id is None:
        source_id = os.path.splitext(os.path.basename(path))[0]
    return AudioBuffer(x, rate, source_id)


def write_wav(path, audio: AudioBuffer) -> None:
    """Write ``audio`` as mono 16-bit PCM (round to nearest, clip to range)."""
    q = np.clip(np.round(audio.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(os.fspath(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(audio.sample_rate_hz)
        w.writeframes(q.tobytes())


def frame_signal(x, sample_rate_hz, win_s, hop_s):
    """Slice ``x`` into centered frames.

    Frame ``i`` is centered on sample ``i * hop`` (time ``i * hop_s``); the
    signal is zero-padded at both ends. Returns an array of shape
    ``(n_frames, win)`` with ``n_frames = 1 + len(x) // hop``.
    """
    hop = int(round(hop_s * sample_rate_hz))
    win = int(round(win_s * sample_rate_hz))
    n_frames = 1 + len(x) // hop
    half = win // 2
    padded = np.concatenate([np.zeros(half), np.asarray(x, dtype=np.float64),
                             np.zeros(win + hop)])
    idx = np.arange(n_frames)[:, None] * hop + np.arange(win)[None, :]
    return padded[idx]


def frame_times(n_frames, hop_s):
    return np.arange(n_frames) * hop_s


def frame_rms(x, sample_rate_hz, win_s=0.025, hop_s=0.010, window=None):
    """RMS of each centered frame, optionally weighted by a taper.

    With ``window="hann"`` the squared samples are averaged with Hann
    weights, which suppresses the ripple a periodic signal produces when a
    frame holds a fractional number of periods.
    """
    frames = frame_signal(x, sample_rate_hz, win_s, hop_s)
    if window is None:
        return np.sqrt(np.mean(frames ** 2, axis=1))
    if window != "hann":
        raise ValueError(f"unknown window {window!r}")
    n = frames.shape[1]
    w = 0.5 - 0.5 * np.cos(2.0 * np.pi * (np.arange(n) + 0.5) / n)
    return np.sqrt(frames ** 2 @ (w / w.sum()))


def rms_to_db(rms):
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(np.asarray(rms, dtype=np.float64))
    return np.maximum(db, DB_FLOOR)


def _runs(mask):
    """(start, stop) index pairs of the True runs in a boolean array."""
    m = np.concatenate([[False], np.asarray(mask, bool), [False]])
    d = np.diff(m.astype(np.int8))
    return list(zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1)))


def trim_silence(a: AudioBuffer, threshold_db=-40.0, min_silence_ms=200.0,
                 win_s=0.025, hop_s=0.010) -> AudioBuffer:
    """Cut out stretches of silence.

    A frame is silent when its RMS is below ``peak_rms_db + threshold_db``.
    Runs of silent frames lasting at least ``min_silence_ms`` are removed;
    a run of frames ``start..stop-1`` loses the samples between the centers
    of frames ``start-1`` and ``stop``. That span lies inside the silent
    frames' analysis windows and is a whole number of hops, so the frame
    grid of the kept audio does not shift and trimming is idempotent. The
    remaining
    audio is concatenated. The input is returned unchanged when nothing
    qualifies.
    """
    if threshold_db >= 0:
        raise DataError("threshold_db must be negative")
    if min_silence_ms <= 0:
        raise DataError("min_silence_ms must be positive")
    x = a.samples
    sr = a.sample_rate_hz
    hop = int(round(hop_s * sr))
    db = rms_to_db(frame_rms(x, sr, win_s, hop_s))
    peak = db.max()
    if peak <= DB_FLOOR:
        raise EmptyAfterTrim(a.source_id or "buffer is all zeros")
    silent = db < peak + threshold_db
    min_frames = int(np.ceil(min_silence_ms / (hop_s * 1000.0) - 1e-9))
    keep = np.ones(x.size, dtype=bool)
    removed = False
    for start, stop in _runs(silent):
        if stop - start < min_frames:
            continue
        lo = max(0, (start - 1) * hop)
        hi = min(x.size, stop * hop)
        if hi > lo:
            keep[lo:hi] = False
            removed = True
    if not removed:
        return a
    if not keep.any():
        raise EmptyAfterTrim(a.source_id or "whole buffer classified silent")
    return a.with_samples(x[keep])

import sys

import numpy as np
import pytest

from hadid.audio_io import AudioBuffer

SR = 16000


def tone(freq, dur_s, sr=SR, amp=0.5):
    t = np.arange(int(round(dur_s * sr))) / sr
    return amp * np.sin(2 * np.pi * freq * t)


def sawtooth(freq, dur_s, sr=SR, rms=0.2):
    """Band-limited sawtooth, the same recipe the corpus generator uses."""
    t = np.arange(int(round(dur_s * sr))) / sr
    x = sum(np.sin(2 * np.pi * h * freq * t) / h for h in range(1, int(sr / 2 // freq) + 1))
    return x * rms / np.sqrt(np.mean(x ** 2))


def noise(dur_s, sr=SR, rms=0.05, seed=0):
    return np.random.default_rng(seed).normal(0, rms, int(round(dur_s * sr)))


def buf(x, sr=SR):
    return AudioBuffer(np.asarray(x, dtype=float), sr)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def planned_utterance(plan, f0=180.0, sr=SR, lead_s=0.25, seed=0):
    """Render a (kind, ms) plan: V = flat sawtooth, C = 2-6 kHz noise at -12 dB.

    Returns the buffer and the true (start_s, end_s, kind) segments.
    """
    from scipy.signal import butter, sosfilt

    rng = np.random.default_rng(seed)
    sos = butter(4, [2000, 6000], btype="band", fs=sr, output="sos")
    parts = [np.zeros(int(lead_s * sr))]
    segs, pos = [], len(parts[0])
    for kind, ms in plan:
        m = int(round(ms * sr / 1000))
        if kind == "V":
            x = sawtooth(f0, m / sr, sr)[:m]
        else:
            x = sosfilt(sos, rng.standard_normal(m + 256))[256:]
            x *= 0.2 * 10 ** (-12 / 20) / np.sqrt(np.mean(x ** 2))
        parts.append(x)
        segs.append((pos / sr, (pos + m) / sr, kind))
        pos += m
    parts.append(np.zeros(int(lead_s * sr)))
    return buf(np.concatenate(parts), sr), segs


DIALECTS = ("Pre-Hilali", "Urban Completely Bedouin", "Hilali", "Sulaymite", "Ma'qilian")


def small_config(**kw):
    from hadid.config import PipelineConfig

    base = dict(hidden_layers=(32, 32), dropout=0.1, max_epochs=80, patience=15, seed=0)
    base.update(kw)
    return PipelineConfig().with_overrides(**base)


def gaussian_features(rng, per_class=40, dialects=DIALECTS, spread=0.4):
    """Feature rows with a distinct mean per dialect, in the 14-column layout."""
    X, y = [], []
    for i, d in enumerate(dialects):
        center = np.zeros(14)
        center[i % 14] = 3.0
        center[(i + 5) % 14] = -2.0
        X.append(center + spread * rng.normal(size=(per_class, 14)))
        y += [d] * per_class
    return np.vstack(X), y


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)

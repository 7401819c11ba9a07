import wave

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import SR, buf, tone
from hadid.audio_io import (AudioBuffer, frame_rms, load_wav, rms_to_db, trim_silence,
                            write_wav)
from hadid.errors import CorruptHeader, EmptyAfterTrim, MissingFile, UnsupportedFormat


def _write_raw(path, frames, channels=1, width=2, sr=SR):
    with wave.open(str(path), "wb") as w:
        w.setnchannels(channels)
        w.setsampwidth(width)
        w.setframerate(sr)
        w.writeframes(frames)


def test_zero_file_loads_as_zeros(tmp_path):
    p = tmp_path / "z.wav"
    _write_raw(p, np.zeros(SR, dtype="<i2").tobytes())
    a = load_wav(p)
    assert a.samples.shape == (16000,) and a.sample_rate_hz == 16000
    assert np.all(a.samples == 0.0)


def test_stereo_symmetric_downmix(tmp_path):
    p = tmp_path / "s.wav"
    inter = np.empty(2 * 1000, dtype="<i2")
    inter[0::2], inter[1::2] = 16384, -16384
    _write_raw(p, inter.tobytes(), channels=2)
    a = load_wav(p)
    assert len(a.samples) == 1000
    assert np.all(a.samples == 0.0)


def test_roundtrip_tone_within_one_lsb(tmp_path):
    x = tone(440, 0.5, amp=0.9)
    p = tmp_path / "t.wav"
    write_wav(p, buf(x))
    back = load_wav(p)
    assert np.max(np.abs(back.samples - x)) <= 1 / 32768


def test_canonical_header_and_extra_chunk(tmp_path):
    # hand-built RIFF with a LIST chunk before data
    data = (np.arange(100, dtype="<i2") * 10).tobytes()
    fmt = (b"fmt " + (16).to_bytes(4, "little") + (1).to_bytes(2, "little")
           + (1).to_bytes(2, "little") + SR.to_bytes(4, "little")
           + (2 * SR).to_bytes(4, "little") + (2).to_bytes(2, "little")
           + (16).to_bytes(2, "little"))
    extra = b"LIST" + (4).to_bytes(4, "little") + b"INFO"
    body = b"WAVE" + fmt + extra + b"data" + len(data).to_bytes(4, "little") + data
    p = tmp_path / "x.wav"
    p.write_bytes(b"RIFF" + len(body).to_bytes(4, "little") + body)
    a = load_wav(p)
    assert np.allclose(a.samples * 32768, np.arange(100) * 10)


def test_load_errors(tmp_path):
    with pytest.raises(MissingFile):
        load_wav(tmp_path / "nope.wav")
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"not a riff file at all, just bytes")
    with pytest.raises(CorruptHeader):
        load_wav(bad)
    p8 = tmp_path / "8bit.wav"
    _write_raw(p8, bytes(200), width=1)
    with pytest.raises(UnsupportedFormat):
        load_wav(p8)


def test_buffer_invariants():
    with pytest.raises(ValueError):
        AudioBuffer(np.array([0.0, 1.5]), SR)
    with pytest.raises(ValueError):
        AudioBuffer(np.zeros(10), 4000)
    with pytest.raises(ValueError):
        AudioBuffer(np.zeros(0), SR)
    a = buf(np.zeros(8000))
    assert a.duration_s == 0.5
    with pytest.raises(ValueError):
        a.samples[0] = 1.0


def test_trim_internal_silence():
    # 0.5 s tone + 1 s zeros + 0.5 s tone: the gap goes, ~1.0 s remains
    x = np.concatenate([tone(300, 0.5), np.zeros(SR), tone(300, 0.5)])
    out = trim_silence(buf(x), -40.0, 200.0)
    assert abs(out.duration_s - 1.0) <= 0.02 + 1e-9


def test_trim_noop_and_all_silent():
    a = buf(tone(300, 1.0))
    assert trim_silence(a) is a or np.array_equal(trim_silence(a).samples, a.samples)
    with pytest.raises(EmptyAfterTrim):
        trim_silence(buf(np.zeros(SR)))


def test_trim_keeps_short_pauses():
    # a 100 ms gap is below the 200 ms minimum and survives
    x = np.concatenate([tone(300, 0.5), np.zeros(SR // 10), tone(300, 0.5)])
    assert trim_silence(buf(x)).duration_s == pytest.approx(1.1)


def test_rms_db_floor_and_value():
    assert rms_to_db(0.0) == -120.0
    r = frame_rms(tone(1000, 0.5, amp=1.0), SR)
    # interior frames of a unit sine: rms 1/sqrt(2)
    assert np.allclose(r[3:-3], 1 / np.sqrt(2), atol=2e-3)


@settings(max_examples=150, deadline=None)
@given(gap=st.integers(0, 60), lead=st.integers(0, 60), seed=st.integers(0, 1000))
def test_trim_idempotent_and_shrinking(gap, lead, seed):
    r = np.random.default_rng(seed)
    x = np.concatenate([np.zeros(lead * 160), r.normal(0, 0.1, 4000),
                        np.zeros(gap * 160), r.normal(0, 0.1, 4000)])
    a = buf(np.clip(x, -1, 1))
    once = trim_silence(a)
    twice = trim_silence(once)
    assert once.duration_s <= a.duration_s
    assert np.array_equal(once.samples, twice.samples)

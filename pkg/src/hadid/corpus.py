"""Corpus manifests and a parametric synthetic-speech generator.

Synthetic utterances alternate band-limited noise "consonants" with
harmonic sawtooth "vowels" whose pitch follows a per-dialect profile. Every
generated file comes with sidecars holding the true segment boundaries and
pitch contour, which makes the corpus an oracle for the extraction pipeline.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, fields
from importlib import resources

import numpy as np
from scipy.signal import butter, sosfilt

from .audio_io import AudioBuffer, write_wav
from .errors import (DataError, DuplicateUtteranceId, IoError, MissingColumn,
                     MissingFile, UnknownDialect)

MANIFEST_COLUMNS = ("utterance_id", "wav_path", "speaker_id", "dialect")


@dataclass(frozen=True)
class ManifestRow:
    utterance_id: str
    wav_path: str
    speaker_id: str
    dialect: str
    duration_s: float | None = None


@dataclass(frozen=True)
class Manifest:
    rows: tuple

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    @property
    def dialects(self):
        return sorted({r.dialect for r in self.rows})


def _sniff_delimiter(header_line):
    return "\t" if "\t" in header_line and "," not in header_line else ","


def load_manifest(path, labels=None) -> Manifest:
    """Read a manifest file; relative wav paths resolve against its directory."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise MissingFile(path)
    base = os.path.dirname(os.path.abspath(path))
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline()
        fh.seek(0)
        reader = csv.DictReader(fh, delimiter=_sniff_delimiter(first))
        header = reader.fieldnames or []
        missing = [c for c in MANIFEST_COLUMNS if c not in header]
        if missing:
            raise MissingColumn(f"{path}: missing column(s) {', '.join(missing)}")
        rows, seen = [], set()
        for rec in reader:
            uid = rec["utterance_id"].strip()
            if uid in seen:
                raise DuplicateUtteranceId(uid)
            seen.add(uid)
            dialect = rec["dialect"].strip()
            if labels is not None and dialect not in labels:
                raise UnknownDialect(f"{uid}: {dialect!r}")
            wav = rec["wav_path"].strip()
            if not os.path.isabs(wav):
                wav = os.path.normpath(os.path.join(base, wav))
            dur = (rec.get("duration_s") or "").strip()
            rows.append(ManifestRow(uid, wav, rec["speaker_id"].strip(), dialect,
                                    float(dur) if dur else None))
    return Manifest(tuple(rows))


def write_manifest(path, manifest: Manifest, relative_to=None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_COLUMNS + ("duration_s",))
        for r in manifest.rows:
            wav = r.wav_path
            if relative_to is not None:
                wav = os.path.relpath(wav, relative_to)
            dur = "" if r.duration_s is None else f"{r.duration_s:.6f}"
            w.writerow([r.utterance_id, wav, r.speaker_id, r.dialect, dur])


@dataclass(frozen=True)
class DialectProfile:
    """Generator parameters for one dialect.

    Durations are in ms; the pitch drift is the magnitude of the pitch
    glide inside each vowel.
    """

    vowel_ms_mean: float
    vowel_ms_std: float
    consonant_ms_mean: float
    consonant_ms_std: float
    syllables_min: int
    syllables_max: int
    base_pitch_hz: float
    pitch_range_st: float
    pitch_drift_st_per_s: float
    speech_rate: float

    def __post_init__(self):
        for name in ("vowel_ms_mean", "vowel_ms_std", "consonant_ms_mean",
                     "consonant_ms_std", "base_pitch_hz", "speech_rate"):
            if not getattr(self, name) > 0:
                raise DataError(f"profile field {name} must be positive")
        if self.vowel_ms_mean <= VOWEL_FLOOR_MS or self.consonant_ms_mean <= CONSONANT_FLOOR_MS:
            raise DataError(f"vowel/consonant means must exceed the floors "
                            f"({VOWEL_FLOOR_MS}/{CONSONANT_FLOOR_MS} ms)")
        if self.pitch_range_st < 0 or self.pitch_drift_st_per_s < 0:
            raise DataError("pitch range and drift must be >= 0")
        if not 1 <= self.syllables_min <= self.syllables_max:
            raise DataError("syllable range must satisfy 1 <= min <= max")

    def expected_pct_v(self, n_syllables=None):
        """%V of an utterance with mean durations (edge consonants included)."""
        n = n_syllables or round(6.0 * self.speech_rate)
        v = n * self.vowel_ms_mean
        return 100.0 * v / (v + (n + 1) * self.consonant_ms_mean)


VOWEL_FLOOR_MS = 45.0
CONSONANT_FLOOR_MS = 50.0


def load_profiles(path=None):
    """Read a profile file (JSON object: dialect -> profile fields).

    Without ``path`` the bundled default profiles are returned.
    """
    if path is None:
        text = resources.files("hadid").joinpath("data/default_profiles.json").read_text("utf-8")
    else:
        path = os.fspath(path)
        if not os.path.isfile(path):
            raise MissingFile(path)
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    raw = json.loads(text)
    raw = raw.get("profiles", raw)
    names = {f.name for f in fields(DialectProfile)}
    out = {}
    for dialect, spec in raw.items():
        unknown = set(spec) - names
        if unknown:
            raise DataError(f"profile {dialect}: unknown field(s) {sorted(unknown)}")
        out[dialect] = DialectProfile(**spec)
    return out


def _shifted_lognormal(rng, mean, std, floor, size):
    """Samples with the given mean and std, bounded below by ``floor``."""
    m = mean - floor
    sigma2 = math.log1p((std / m) ** 2)
    mu = math.log(m) - sigma2 / 2
    return floor + rng.lognormal(mu, math.sqrt(sigma2), size)


@dataclass(frozen=True)
class Speaker:
    speaker_id: str
    pitch_offset_st: float
    duration_scale: float


@dataclass
class SynthUtterance:
    audio: AudioBuffer
    segments: list        # (start_s, end_s, kind) in file time
    pitch: list           # (time_s, f0_hz or None) every 10 ms, file time
    speech_start_s: float
    speech_end_s: float


_NOISE_SOS = {}


def _noise_sos(sr):
    if sr not in _NOISE_SOS:
        _NOISE_SOS[sr] = butter(4, [2000.0, min(6000.0, 0.45 * sr)], btype="bandpass",
                                fs=sr, output="sos")
    return _NOISE_SOS[sr]


def _ramp(n, sr, ramp_s=0.001):
    env = np.ones(n)
    r = min(int(ramp_s * sr), n // 2)
    if r > 0:
        w = 0.5 - 0.5 * np.cos(np.pi * (np.arange(r) + 0.5) / r)
        env[:r] = w
        env[n - r:] = w[::-1]
    return env


def synth_utterance(profile: DialectProfile, speaker: Speaker, rng, *,
                    sample_rate_hz=16000, n_syllables=None, silence_s=0.25,
                    vowel_rms=0.2, consonant_db=-12.0, source_id="") -> SynthUtterance:
    """Render one utterance ``C (V C)+`` with leading/trailing silence."""
    sr = sample_rate_hz
    if n_syllables is None:
        target_s = rng.uniform(5.0, 7.0)
        n_syllables = int(np.clip(round(profile.speech_rate * target_s),
                                  profile.syllables_min, profile.syllables_max))
    n = int(n_syllables)
    scale = speaker.duration_scale
    v_ms = _shifted_lognormal(rng, profile.vowel_ms_mean, profile.vowel_ms_std,
                              VOWEL_FLOOR_MS, n) * scale
    c_ms = _shifted_lognormal(rng, profile.consonant_ms_mean, profile.consonant_ms_std,
                              CONSONANT_FLOOR_MS, n + 1) * scale
    targets = rng.uniform(-profile.pitch_range_st / 2, profile.pitch_range_st / 2, n)
    slopes = profile.pitch_drift_st_per_s * rng.choice([-1.0, 1.0], n)
    base = profile.base_pitch_hz * 2.0 ** (speaker.pitch_offset_st / 12.0)

    kinds, lens = [], []
    for i in range(n):
        kinds += ["C", "V"]
        lens += [c_ms[i], v_ms[i]]
    kinds.append("C")
    lens.append(c_ms[n])
    lens_samp = [max(1, int(round(l * sr / 1000.0))) for l in lens]

    lead = int(round(silence_s * sr))
    total = lead + sum(lens_samp) + lead
    x = np.zeros(total)
    f0_track = np.full(total, np.nan)
    c_rms = vowel_rms * 10.0 ** (consonant_db / 20.0)
    sos = _noise_sos(sr)
    pos = lead
    segments = []
    vi = 0
    for kind, m in zip(kinds, lens_samp):
        if kind == "C":
            pad = 256
            noise = sosfilt(sos, rng.standard_normal(m + pad))[pad:]
            noise *= c_rms / max(np.sqrt(np.mean(noise ** 2)), 1e-12)
            x[pos:pos + m] = noise * _ramp(m, sr)
        else:
            t = (np.arange(m) - (m - 1) / 2.0) / sr
            st = targets[vi] + slopes[vi] * t
            f0 = base * 2.0 ** (st / 12.0)
            phase = 2.0 * np.pi * np.cumsum(f0) / sr
            wave_ = np.zeros(m)
            n_harm = int((0.5 * sr) // f0.max())
            for h in range(1, n_harm + 1):
                wave_ += np.sin(h * phase) / h
            wave_ *= vowel_rms / max(np.sqrt(np.mean(wave_ ** 2)), 1e-12)
            x[pos:pos + m] = wave_ * _ramp(m, sr)
            f0_track[pos:pos + m] = f0
            vi += 1
        segments.append((pos / sr, (pos + m) / sr, kind))
        pos += m
    peak = np.max(np.abs(x))
    if peak > 0.99:
        x *= 0.99 / peak
    hop = int(0.010 * sr)
    pitch = [(i / sr, None if np.isnan(f0_track[i]) else float(f0_track[i]))
             for i in range(0, total, hop)]
    return SynthUtterance(AudioBuffer(x, sr, source_id), segments, pitch,
                          lead / sr, (total - lead) / sr)


def make_speakers(dialect_index, dialect, count, seed):
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1, dialect_index]))
    out = []
    for s in range(count):
        out.append(Speaker(f"{_slug(dialect)}_s{s + 1:02d}",
                           float(rng.uniform(-2.0, 2.0)),
                           float(rng.uniform(0.95, 1.05))))
    return out


def _slug(label):
    return "".join(ch if ch.isalnum() else "_" for ch in label.lower()).strip("_")


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["NA" if v is None else (f"{v:.6f}" if isinstance(v, float) else v)
                        for v in row])


def synth_corpus(profiles, speakers_per_dialect, utterances_per_speaker, seed, out_dir,
                 *, sample_rate_hz=16000, jobs=1) -> Manifest:
    """Generate a labelled corpus under ``out_dir``.

    Writes ``wav/<id>.wav``, ``truth/<id>.segments.csv``,
    ``truth/<id>.pitch.csv``, ``profiles.json`` and ``manifest.csv``. Each
    utterance draws from its own generator seeded by ``(seed, index)``, so
    the output does not depend on ``jobs``.
    """
    if not profiles:
        raise DataError("at least one dialect profile is required")
    if speakers_per_dialect < 1 or utterances_per_speaker < 1:
        raise DataError("speaker and utterance counts must be >= 1")
    out_dir = os.fspath(out_dir)
    try:
        os.makedirs(os.path.join(out_dir, "wav"), exist_ok=True)
        os.makedirs(os.path.join(out_dir, "truth"), exist_ok=True)
    except OSError as exc:
        raise IoError(f"{out_dir}: {exc}") from exc

    jobs_list = []
    index = 0
    for d_idx, (dialect, profile) in enumerate(profiles.items()):
        for spk in make_speakers(d_idx, dialect, speakers_per_dialect, seed):
            for u in range(utterances_per_speaker):
                uid = f"{spk.speaker_id}_u{u + 1:03d}"
                jobs_list.append((index, uid, dialect, profile, spk))
                index += 1

    args = [(seed, j, out_dir, sample_rate_hz) for j in jobs_list]
    if jobs and jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_render_one, args))
    else:
        rows = [_render_one(a) for a in args]

    with open(os.path.join(out_dir, "profiles.json"), "w", encoding="utf-8") as fh:
        json.dump({d: asdict(p) for d, p in profiles.items()}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest = Manifest(tuple(rows))
    write_manifest(os.path.join(out_dir, "manifest.csv"), manifest, relative_to=out_dir)
    return manifest


def _render_one(arg):
    seed, (index, uid, dialect, profile, spk), out_dir, sr = arg
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2, index]))
    utt = synth_utterance(profile, spk, rng, sample_rate_hz=sr, source_id=uid)
    wav = os.path.join(out_dir, "wav", f"{uid}.wav")
    try:
        write_wav(wav, utt.audio)
        _write_rows(os.path.join(out_dir, "truth", f"{uid}.segments.csv"),
                    ("start_s", "end_s", "kind"), utt.segments)
        _write_rows(os.path.join(out_dir, "truth", f"{uid}.pitch.csv"),
                    ("time_s", "f0_hz"), utt.pitch)
    except OSError as exc:
        raise IoError(f"{out_dir}: {exc}") from exc
    return ManifestRow(uid, wav, spk.speaker_id, dialect, utt.audio.duration_s)


def read_truth_segments(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return [(float(r["start_s"]), float(r["end_s"]), r["kind"]) for r in csv.DictReader(fh)]

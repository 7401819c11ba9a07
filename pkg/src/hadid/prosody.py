"""Utterance-level rhythm and intonation metrics."""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import audio_io, pitch as pitch_mod, segmentation
from .errors import (DataError, EmptyAfterTrim, HadidError, NoNuclei,
                     NoVoicedNucleus, TooFewSegments, UnusableUtterance)
from .pitch import PitchTrack, hz_to_semitones
from .segmentation import C, V, NucleusList, SegmentTrack

# canonical column order of the feature table
FEATURE_NAMES = (
    "pct_v", "delta_c", "delta_v", "varco_c", "varco_v", "rpvi_c", "npvi_v",
    "speech_rate", "pitch_range", "pitch_top", "pitch_bottom", "pitch_median",
    "traj_intra", "traj_inter",
)
RHYTHM_NAMES = ("pct_v", "delta_v", "delta_c", "varco_v", "varco_c", "rpvi_c",
                "npvi_v", "speech_rate")
INTONATION_NAMES = ("pitch_bottom", "pitch_median", "pitch_top", "pitch_range",
                    "traj_intra", "traj_inter")


@dataclass(frozen=True)
class FeatureVector:
    pct_v: float
    delta_v: float
    delta_c: float
    varco_v: float
    varco_c: float
    rpvi_c: float
    npvi_v: float
    speech_rate: float
    pitch_bottom: float
    pitch_median: float
    pitch_top: float
    pitch_range: float
    traj_intra: float
    traj_inter: float

    def as_array(self, names=FEATURE_NAMES):
        return np.array([getattr(self, n) for n in names], dtype=np.float64)

    @classmethod
    def from_mapping(cls, values):
        return cls(**{f.name: float(values[f.name]) for f in fields(cls)})


@dataclass(frozen=True)
class RhythmMetrics:
    pct_v: float
    delta_v: float
    delta_c: float
    varco_v: float
    varco_c: float
    rpvi_c: float
    npvi_v: float
    speech_rate: float


@dataclass(frozen=True)
class IntonationMetrics:
    pitch_bottom: float
    pitch_median: float
    pitch_top: float
    pitch_range: float
    traj_intra: float
    traj_inter: float


def _rpvi(d):
    return float(np.mean(np.abs(np.diff(d))))


def _npvi(d):
    pairs_mean = (d[:-1] + d[1:]) / 2.0
    return float(100.0 * np.mean(np.abs(np.diff(d)) / pairs_mean))


def rhythm_metrics(s: SegmentTrack) -> RhythmMetrics:
    """Interval-based rhythm metrics; durations in ms, deviations are population SDs."""
    v = s.durations_ms(V)
    c = s.durations_ms(C)
    if v.size < 2:
        raise TooFewSegments(V, 2, v.size)
    if c.size < 2:
        raise TooFewSegments(C, 2, c.size)
    T = s.utterance_duration_s
    delta_v = float(np.std(v))
    delta_c = float(np.std(c))
    return RhythmMetrics(
        pct_v=float(100.0 * v.sum() / (1000.0 * T)),
        delta_v=delta_v,
        delta_c=delta_c,
        varco_v=100.0 * delta_v / float(np.mean(v)),
        varco_c=100.0 * delta_c / float(np.mean(c)),
        rpvi_c=_rpvi(c),
        npvi_v=_npvi(v),
        speech_rate=v.size / T,
    )


def _nucleus_f0(p: PitchTrack, n: NucleusList):
    """Voiced F0 values of each nucleus, in time order."""
    out = []
    voiced = p.voiced
    for s, e in n.nuclei:
        inside = (p.times >= s) & (p.times <= e) & voiced
        out.append(p.f0_hz[inside])
    return out


def intonation_metrics(p: PitchTrack, n: NucleusList) -> IntonationMetrics:
    """Pitch level and movement measured on the voiced frames of the nuclei.

    Levels are the 2nd/50th/98th percentiles of the pooled F0 values.
    Trajectories sum absolute semitone steps within nuclei (between
    consecutive voiced frames) and between nuclei (last voiced frame of one
    to the first of the next), each divided by the utterance duration.
    """
    per_nucleus = [f for f in _nucleus_f0(p, n) if f.size]
    if not per_nucleus:
        raise NoVoicedNucleus("no voiced frame inside any nucleus")
    pooled = np.concatenate(per_nucleus)
    bottom, median, top = (float(v) for v in np.percentile(pooled, [2.0, 50.0, 98.0]))
    T = n.utterance_duration_s
    intra = sum(float(np.sum(np.abs(12.0 * np.log2(f[1:] / f[:-1])))) for f in per_nucleus)
    inter = sum(abs(12.0 * np.log2(b[0] / a[-1])) for a, b in zip(per_nucleus, per_nucleus[1:]))
    return IntonationMetrics(
        pitch_bottom=bottom,
        pitch_median=median,
        pitch_top=top,
        pitch_range=hz_to_semitones(top, bottom),
        traj_intra=intra / T,
        traj_inter=float(inter) / T,
    )


@dataclass
class Extraction:
    """Everything computed for one utterance, kept for dumps and debugging."""

    features: FeatureVector
    audio: audio_io.AudioBuffer
    pitch: PitchTrack
    nuclei: NucleusList
    segments: SegmentTrack


def analyze_utterance(a: audio_io.AudioBuffer, cfg=None) -> Extraction:
    """Run the full chain and keep the intermediate tracks."""
    from .config import PipelineConfig

    cfg = cfg or PipelineConfig()
    try:
        trimmed = audio_io.trim_silence(a, cfg.silence_threshold_db, cfg.min_silence_ms)
        track = pitch_mod.estimate_pitch(
            trimmed, cfg.f0_floor_hz, cfg.f0_ceil_hz,
            voicing_threshold=cfg.voicing_threshold, silence_db=cfg.voicing_silence_db)
        contour = segmentation.band_intensity(trimmed, cfg.band_low_hz, cfg.band_high_hz)
        nuclei = segmentation.detect_nuclei(
            contour, track, peak_drop_db=cfg.peak_drop_db,
            min_nucleus_ms=cfg.min_nucleus_ms, merge_ms=cfg.merge_ms)
        segs = segmentation.coarse_cv_segment(nuclei, edge_min_ms=cfg.edge_min_ms)
        rhythm = rhythm_metrics(segs)
        tone = intonation_metrics(track, nuclei)
    except (EmptyAfterTrim, NoNuclei, TooFewSegments, NoVoicedNucleus) as exc:
        raise UnusableUtterance(type(exc).__name__, str(exc)) from exc
    except DataError as exc:
        # e.g. a buffer too short for the pitch tracker
        raise UnusableUtterance(type(exc).__name__, str(exc)) from exc
    values = {**rhythm.__dict__, **tone.__dict__}
    return Extraction(FeatureVector(**values), trimmed, track, nuclei, segs)


def extract_features(a: audio_io.AudioBuffer, cfg=None) -> FeatureVector:
    """trim -> pitch -> band intensity -> nuclei -> C/V segments -> metrics."""
    return analyze_utterance(a, cfg).features


FEATURE_CSV_HEADER = ("utterance_id", "speaker_id", "dialect") + FEATURE_NAMES


@dataclass
class FeatureTable:
    """Rows of utterance features in canonical column order."""

    utterance_ids: list
    speaker_ids: list
    dialects: list
    X: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64).reshape(-1, len(FEATURE_NAMES))
        n = self.X.shape[0]
        if not (len(self.utterance_ids) == len(self.speaker_ids) == len(self.dialects) == n):
            raise DataError("feature table columns have different lengths")

    def __len__(self):
        return self.X.shape[0]

    def subset(self, rows):
        rows = np.asarray(rows)
        if rows.dtype == bool:
            rows = np.flatnonzero(rows)
        pick = lambda seq: [seq[i] for i in rows]
        return FeatureTable(pick(self.utterance_ids), pick(self.speaker_ids),
                            pick(self.dialects), self.X[rows])

    def column(self, name):
        return self.X[:, FEATURE_NAMES.index(name)]

    @classmethod
    def from_vectors(cls, utterance_ids, speaker_ids, dialects, vectors):
        X = np.array([v.as_array() for v in vectors]).reshape(-1, len(FEATURE_NAMES))
        return cls(list(utterance_ids), list(speaker_ids), list(dialects), X)

    def write_csv(self, path):
        import csv

        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(FEATURE_CSV_HEADER)
            for uid, spk, dia, row in zip(self.utterance_ids, self.speaker_ids,
                                          self.dialects, self.X):
                w.writerow([uid, spk, dia] + [repr(float(v)) for v in row])

    @classmethod
    def read_csv(cls, path):
        import csv
        import os

        from .errors import MissingColumn, MissingFile

        if not os.path.isfile(path):
            raise MissingFile(path)
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in FEATURE_CSV_HEADER if c not in (reader.fieldnames or [])]
            if missing:
                raise MissingColumn(f"{path}: missing column(s) {', '.join(missing)}")
            ids, spk, dia, rows = [], [], [], []
            for rec in reader:
                ids.append(rec["utterance_id"])
                spk.append(rec["speaker_id"])
                dia.append(rec["dialect"])
                rows.append([float(rec[n]) for n in FEATURE_NAMES])
        return cls(ids, spk, dia, np.array(rows).reshape(-1, len(FEATURE_NAMES)))


def _extract_row(args):
    row, cfg, keep_tracks = args
    try:
        audio = audio_io.load_wav(row.wav_path, row.utterance_id)
        ex = analyze_utterance(audio, cfg)
    except UnusableUtterance as exc:
        return row, None, exc.reason, str(exc)
    except HadidError as exc:
        return row, None, type(exc).__name__, str(exc)
    return row, (ex if keep_tracks else ex.features), None, None


def extract_manifest(manifest, cfg=None, *, jobs=1, keep_tracks=False, log=None):
    """Extract features for every manifest row.

    Returns ``(table, skipped, extras)``: the feature table of usable
    utterances in manifest order, ``(utterance_id, reason, message)`` for
    the others, and (with ``keep_tracks``) the per-utterance
    :class:`Extraction` objects keyed by id.
    """
    args = [(r, cfg, keep_tracks) for r in manifest]
    if jobs and jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_extract_row, args, chunksize=4))
    else:
        results = [_extract_row(a) for a in args]
    ids, spk, dia, vecs, skipped, extras = [], [], [], [], [], {}
    for row, out, reason, msg in results:
        if out is None:
            skipped.append((row.utterance_id, reason, msg))
            if log is not None:
                log.warning("skipping %s: %s", row.utterance_id, reason)
            continue
        ids.append(row.utterance_id)
        spk.append(row.speaker_id)
        dia.append(row.dialect)
        if keep_tracks:
            extras[row.utterance_id] = out
            out = out.features
        vecs.append(out)
    return FeatureTable.from_vectors(ids, spk, dia, vecs), skipped, extras

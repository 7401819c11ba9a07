"""
From waveform to prosodic features
==================================

Walk one synthetic utterance through the extraction chain and compare the
detected vowel/consonant segmentation with the generator's ground truth.
Run with ``python notebooks/01_one_utterance.py``.
"""

import numpy as np

from hadid.corpus import load_profiles, make_speakers, synth_utterance
from hadid.prosody import analyze_utterance, rhythm_metrics
from hadid.segmentation import SegmentTrack, V

# a Hilali speaker from the bundled profiles
profiles = load_profiles()
profile = profiles["Hilali"]
speaker = make_speakers(2, "Hilali", 1, seed=5)[0]
utt = synth_utterance(profile, speaker, np.random.default_rng(5), n_syllables=20)
print(f"{utt.audio.duration_s:.2f} s of audio, speech from {utt.speech_start_s:.2f} "
      f"to {utt.speech_end_s:.2f} s")

# the whole chain, keeping the intermediate tracks
ex = analyze_utterance(utt.audio)
print(f"after trimming: {ex.audio.duration_s:.2f} s")
voiced = ex.pitch.voiced
print(f"pitch: {voiced.mean():.0%} of frames voiced, median "
      f"{np.nanmedian(ex.pitch.f0_hz):.1f} Hz")
print(f"{len(ex.nuclei.nuclei)} nuclei detected (20 planted)")

# ground truth straight from the generator
true_v = [1000 * (e - s) for s, e, k in utt.segments if k == V]
print(f"mean vowel length: true {np.mean(true_v):.1f} ms, "
      f"detected {np.mean(ex.segments.durations_ms(V)):.1f} ms")

# rhythm metrics on the true segmentation vs the detected one
t0 = utt.speech_start_s
truth = SegmentTrack([(s - t0, e - t0, k) for s, e, k in utt.segments],
                     utt.speech_end_s - t0)
for name, r in (("truth", rhythm_metrics(truth)), ("detected", ex.features)):
    print(f"{name:>9}: %V {r.pct_v:5.1f}  dC {r.delta_c:5.1f} ms  "
          f"nPVI-V {r.npvi_v:5.1f}  rate {r.speech_rate:.2f}/s")

# the full 14-value vector
for k, v in ex.features.__dict__.items():
    print(f"  {k:<13}{v:10.3f}")

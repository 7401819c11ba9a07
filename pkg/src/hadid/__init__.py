"""Prosody-based hierarchical dialect identification toolkit."""

__version__ = "0.1.0"

from .audio_io import AudioBuffer, load_wav, trim_silence, write_wav
from .pitch import PitchTrack, estimate_pitch, hz_to_semitones
from .segmentation import (NucleusList, SegmentTrack, band_intensity,
                           coarse_cv_segment, detect_nuclei)
from .prosody import (FEATURE_NAMES, FeatureTable, FeatureVector, extract_features,
                      intonation_metrics, rhythm_metrics)
from .stats import AnovaResult, anova_oneway, dialect_means, rank_features
from .neuralnet import Mlp, TrainConfig, forward, gradient_check, init_mlp, loss, train
from .hierarchy import (DialectTree, HadidModel, classify, default_hierarchy, load_hierarchy,
                        load_model, save_model, train_lcpn)
from .evaluation import (hierarchical_precision, micro_precision, run_experiment,
                         speaker_independent_folds)
from .corpus import DialectProfile, load_manifest, load_profiles, synth_corpus
from .config import PipelineConfig, load_config

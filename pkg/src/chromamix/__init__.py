"""Chromagram-based pitch-aware remixing for source-separation training data."""

from .audio_io import SAMPLE_RATE, AudioSegment, Stem, load_wav, save_wav
from .chroma import ChromaVector, Chromagram, chroma_vector, chromagram
from .dataset import Manifest, SegmentPool, StemPair, load_manifest, synth_corpus
from .evalmetrics import LossWeights, SdrReport, evaluate_separation, sdr, source_loss, total_loss
from .matching import MatchConfig, MatchMode, ScoredCandidate, match_score, sample_partner, softmax_probs
from .remix import RemixRecord, Strategy, remix_mix_audio, remix_pitch_aware, remix_random

__version__ = "0.1.0"

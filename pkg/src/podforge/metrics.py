"""Evaluation metrics: word error rate, speaker similarity, speed ratio."""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .audio import KIND_MFCC, Waveform, extract_features
from .errors import ZeroDuration

_WORD_RE = re.compile(r"[\w']+")


def _normalize_words(text: str) -> list[str]:
    # lowercase + strip punctuation so WER ignores the normalizer's added "."
    return _WORD_RE.findall(text.lower())


def wer(reference: str, hypothesis: str) -> float:
    """Word error rate: word-level edit distance / max(1, reference length)."""
    ref = _normalize_words(reference)
    hyp = _normalize_words(hypothesis)
    # single-row Levenshtein with unit costs
    prev = list(range(len(hyp) + 1))
    for i, rw in enumerate(ref, start=1):
        cur = [i] + [0] * len(hyp)
        for j, hw in enumerate(hyp, start=1):
            cur[j] = min(
                prev[j] + 1,                      # deletion
                cur[j - 1] + 1,                   # insertion
                prev[j - 1] + (rw != hw),         # substitution / match
            )
        prev = cur
    return prev[-1] / max(1, len(ref))


@dataclass
class SpeakerEmbedding:
    """Per-coefficient mean ++ std of MFCC-13 over the utterance (26 values)."""

    vector: np.ndarray


def speaker_embedding(w: Waveform) -> SpeakerEmbedding:
    feats = extract_features(w, KIND_MFCC).frames
    vec = np.concatenate([feats.mean(axis=0), feats.std(axis=0)])
    return SpeakerEmbedding(vec)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def sim(a: Waveform, b: Waveform) -> float:
    """Cosine similarity of the two speaker embeddings, in [-1, 1]."""
    return cosine(speaker_embedding(a).vector, speaker_embedding(b).vector)


@dataclass
class SpeedMeasurement:
    """Inference-time-to-audio-duration ratio; r < 1 is faster than real time."""

    t_inf: float
    t_syn: float
    r: float


def speed_ratio(t_inf: float, t_syn: float) -> SpeedMeasurement:
    if t_syn <= 0.0:
        raise ZeroDuration("synthesized duration must be positive")
    if t_inf < 0.0:
        raise ValueError("inference time must be non-negative")
    # decimal-exact division so short decimal inputs give the expected
    # short decimal ratio (3.3 / 10.0 reports as 0.33, not 0.32999...)
    r = float(Fraction(str(t_inf)) / Fraction(str(t_syn)))
    return SpeedMeasurement(t_inf, t_syn, r)

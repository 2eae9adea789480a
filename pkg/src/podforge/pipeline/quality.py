"""MOS estimation slot and quality filtering."""

from __future__ import annotations

import numpy as np

from ..audio import Waveform
from ..errors import EmptyAudio, MissingScore
from .manifest import ManifestRecord

SNR_FRAME = 640  # 40 ms at 16 kHz


class QualityScorer:
    """Waveform -> MOS estimate in [1, 5]; must be deterministic."""

    name = "scorer"

    def score(self, w: Waveform) -> float:
        raise NotImplementedError


class SnrProxyScorer(QualityScorer):
    """Maps the p90/p10 frame-RMS ratio onto the MOS scale.

    snr_db = 20*log10(p90/p10); mos = clamp(1 + 4*snr_db/40, 1, 5).
    Constant-level audio scores 1.0, a 40 dB dynamic range scores 5.0.
    """

    name = "snr_proxy"

    def score(self, w: Waveform) -> float:
        n_frames = len(w.samples) // SNR_FRAME
        if n_frames == 0:
            frames_rms = np.array([np.sqrt((w.samples ** 2).mean())])
        else:
            trimmed = w.samples[:n_frames * SNR_FRAME].reshape(n_frames, SNR_FRAME)
            frames_rms = np.sqrt((trimmed ** 2).mean(axis=1))
        p10, p90 = np.percentile(frames_rms, [10, 90])
        if p90 <= 0.0:
            return 1.0
        if p10 <= 0.0:
            return 5.0
        snr_db = 20.0 * np.log10(p90 / p10)
        return float(np.clip(1.0 + 4.0 * snr_db / 40.0, 1.0, 5.0))


def score_quality(w: Waveform, scorer: QualityScorer) -> float:
    if len(w.samples) == 0:
        raise EmptyAudio("cannot score empty audio")
    value = float(scorer.score(w))
    if not 1.0 <= value <= 5.0:
        raise ValueError(f"scorer {scorer.name!r} returned {value} outside [1, 5]")
    return value


def filter_quality(records: list[ManifestRecord], threshold: float = 3.8,
                   ) -> tuple[list[ManifestRecord], list[ManifestRecord]]:
    """Partition records on mos > threshold (strict). All records advance
    to the scored stage."""
    kept, dropped = [], []
    for rec in records:
        if rec.mos is None:
            raise MissingScore(f"record {rec.id} has no mos")
        rec.advance("scored")
        (kept if rec.mos > threshold else dropped).append(rec)
    return kept, dropped

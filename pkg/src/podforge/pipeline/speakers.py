"""Single-speaker filtering via windowed speaker-embedding spread."""

from __future__ import annotations

from typing import Optional

from ..audio import Waveform
from ..errors import TooShort
from ..metrics import cosine, speaker_embedding
from .manifest import ManifestRecord

ANALYSIS_WINDOW_S = 2.0
ANALYSIS_HOP_S = 1.0
# Cosine-distance rejection threshold, calibrated on the synthetic
# fixture voices; not a universal constant.
MAX_COSINE_DISTANCE = 0.35


def filter_single_speaker(w: Waveform, record: ManifestRecord,
                          threshold: float = MAX_COSINE_DISTANCE,
                          ) -> Optional[ManifestRecord]:
    """Keep the record only if all 2 s windows embed to one tight cluster.

    Returns the advanced record, or None when the max pairwise cosine
    distance between window embeddings exceeds the threshold.
    """
    if w.duration_s < 2 * ANALYSIS_WINDOW_S:
        raise TooShort("speaker filtering needs at least 4 s of audio")
    win = int(ANALYSIS_WINDOW_S * w.sample_rate)
    hop = int(ANALYSIS_HOP_S * w.sample_rate)
    embeddings = []
    for start in range(0, len(w.samples) - win + 1, hop):
        clip = Waveform(w.samples[start:start + win], w.sample_rate)
        embeddings.append(speaker_embedding(clip).vector)
    for i in range(len(embeddings)):
        for j in range(i + 1, len(embeddings)):
            if 1.0 - cosine(embeddings[i], embeddings[j]) > threshold:
                return None
    record.advance("speaker_filtered")
    record.speaker_count = 1
    return record

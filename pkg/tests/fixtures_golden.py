"""Fixture records behind the checked-in corpus-format golden files.

Silence audio plus a codebook whose entry 520 sits exactly at the
silence MFCC point makes every emitted token <|audio_token_520|>,
mirroring the token id shown in upstream documentation of the format,
deterministically on any platform.
"""

from __future__ import annotations

import numpy as np

from fixtures_voices import silence

from podforge.audio import save_wav
from podforge.codec import Codebook
from podforge.pipeline.manifest import ManifestRecord

GOLDEN_SPEAKER = "host0"
GOLDEN_UTTERANCES = [
    ("Hey, great to have you in Chatpods.", 2.0),   # 49 tokens
    ("Hi.", 1.28),                                  # 31 tokens
    ("Welcome back to the show.", 5.0),             # 124 tokens
]


def forced_token_codebook(token_id: int = 520) -> Codebook:
    centroids = np.full((1024, 13), 1000.0)
    centroids[token_id] = 0.0
    return Codebook(centroids, np.full((1024, 513), 1e-6))


def write_golden_records(directory) -> list[ManifestRecord]:
    records = []
    for i, (text, duration_s) in enumerate(GOLDEN_UTTERANCES):
        path = directory / f"golden{i}.wav"
        save_wav(silence(duration_s), path)
        records.append(ManifestRecord(
            id=f"golden{i}", source_path=str(path), start_s=0.0,
            end_s=duration_s, duration_s=duration_s, sample_rate=16000,
            stage="transcribed", text=text, speaker_id=GOLDEN_SPEAKER,
        ))
    return records

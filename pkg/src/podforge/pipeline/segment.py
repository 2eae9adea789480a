"""Chunking and energy-based utterance segmentation."""

from __future__ import annotations

import numpy as np

from ..audio import Waveform, frame_count
from .manifest import ManifestRecord

VAD_FRAME = 640                 # 40 ms at 16 kHz
VAD_START_RMS = 0.02
VAD_END_RMS = 0.01
VAD_START_FRAMES = 3            # consecutive loud frames to open a segment
VAD_END_FRAMES = 8              # >= 300 ms of quiet closes a segment


def _record(rec_id, source_path, start_sample, end_sample, rate, stage):
    start_s = start_sample / rate
    end_s = end_sample / rate
    return ManifestRecord(
        id=rec_id, source_path=str(source_path), start_s=start_s, end_s=end_s,
        duration_s=end_s - start_s, sample_rate=rate, stage=stage,
    )


def chunk_audio(w: Waveform, chunk_s: float = 60.0, source_path: str = "",
                id_prefix: str = "chunk") -> list[tuple[Waveform, ManifestRecord]]:
    """Consecutive non-overlapping chunks of chunk_s seconds.

    The final remainder is kept only when it is at least one second long.
    """
    if chunk_s <= 0:
        raise ValueError("chunk_s must be positive")
    step = int(round(chunk_s * w.sample_rate))
    min_tail = w.sample_rate  # 1 s
    out = []
    pos = 0
    index = 0
    n = len(w.samples)
    while pos < n:
        end = min(pos + step, n)
        if end - pos < step and end - pos < min_tail:
            break
        rec = _record(f"{id_prefix}{index:04d}", source_path, pos, end,
                      w.sample_rate, "chunked")
        out.append((Waveform(w.samples[pos:end].copy(), w.sample_rate), rec))
        pos = end
        index += 1
    return out


def _vad_spans(energies: np.ndarray) -> list[tuple[int, int]]:
    """Speech spans in frame indices, with onset/offset hysteresis."""
    spans = []
    n = len(energies)
    i = 0
    while i < n:
        # find onset: VAD_START_FRAMES consecutive frames above the start level
        while i < n:
            if i + VAD_START_FRAMES <= n and np.all(energies[i:i + VAD_START_FRAMES] > VAD_START_RMS):
                break
            i += 1
        if i >= n:
            break
        start = i
        quiet = 0
        j = start
        while j < n:
            if energies[j] < VAD_END_RMS:
                quiet += 1
                if quiet >= VAD_END_FRAMES:
                    break
            else:
                quiet = 0
            j += 1
        end = j + 1 - quiet if quiet >= VAD_END_FRAMES else n
        spans.append((start, end))
        i = j + 1
    return spans


def _split_long(span: tuple[int, int], energies: np.ndarray, max_frames: int):
    start, end = span
    if end - start <= max_frames:
        return [span]
    interior = energies[start + 1:end - 1]
    cut = start + 1 + int(interior.argmin())
    return _split_long((start, cut), energies, max_frames) + \
        _split_long((cut, end), energies, max_frames)


def segment_utterances(w: Waveform, min_s: float = 5.0, max_s: float = 60.0,
                       source_path: str = "", id_prefix: str = "seg",
                       ) -> list[tuple[Waveform, ManifestRecord]]:
    """Energy-VAD segmentation: split on silences, drop short segments,
    cut over-length segments at their quietest interior frame."""
    n_frames = frame_count(len(w.samples), VAD_FRAME, VAD_FRAME)
    if n_frames == 0:
        return []
    trimmed = w.samples[:n_frames * VAD_FRAME]
    energies = np.sqrt((trimmed.reshape(n_frames, VAD_FRAME) ** 2).mean(axis=1))

    min_frames = int(np.ceil(min_s * w.sample_rate / VAD_FRAME))
    max_frames = max(2, int(max_s * w.sample_rate / VAD_FRAME))

    spans = []
    for raw in _vad_spans(energies):
        spans.extend(_split_long(raw, energies, max_frames))

    out = []
    for start, end in spans:
        if end - start < min_frames:
            continue
        lo, hi = start * VAD_FRAME, min(end * VAD_FRAME, len(w.samples))
        rec = _record(f"{id_prefix}{len(out):04d}", source_path, lo, hi,
                      w.sample_rate, "segmented")
        out.append((Waveform(w.samples[lo:hi].copy(), w.sample_rate), rec))
    return out

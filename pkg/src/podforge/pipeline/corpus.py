"""Training corpus emission: unsupervised pretrain lines and SFT JSONL."""

from __future__ import annotations

import json

from .. import codec as codec_mod
from ..audio import CANONICAL_RATE, Waveform, load_wav, resample
from ..errors import CodecMismatch, IoFailure, MixedSpeakers
from ..tokens import END_LITERAL, N_AUDIO_TOKENS, audio_token_literal
from .manifest import ManifestRecord


def load_record_audio(rec: ManifestRecord) -> Waveform:
    """Fetch a record's audio span at the canonical rate."""
    w = load_wav(rec.source_path)
    lo = int(round(rec.start_s * w.sample_rate))
    hi = int(round(rec.end_s * w.sample_rate))
    if not (lo == 0 and hi >= len(w.samples)):
        w = Waveform(w.samples[lo:hi], w.sample_rate)
    if w.sample_rate != CANONICAL_RATE:
        w = resample(w, CANONICAL_RATE)
    return w


def _token_literals(rec: ManifestRecord, codec: "codec_mod.Codebook") -> str:
    tokens = codec_mod.encode(load_record_audio(rec), codec)
    if (tokens >= N_AUDIO_TOKENS).any():
        raise CodecMismatch(
            f"record {rec.id} produced token id {int(tokens.max())} >= {N_AUDIO_TOKENS}"
        )
    return "".join(audio_token_literal(int(t)) for t in tokens) + END_LITERAL


def build_pretrain_corpus(records: list[ManifestRecord], codec, out) -> int:
    """One line per record: transcript, a space, audio-token literals,
    terminal end literal. No separator token between modalities."""
    lines = []
    for rec in records:
        if rec.text is None:
            raise ValueError(f"record {rec.id} has no transcript")
        lines.append(f"{rec.text} {_token_literals(rec, codec)}")
    try:
        with open(out, "w", encoding="utf-8") as fh:
            fh.writelines(line + "\n" for line in lines)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return len(lines)


def build_sft_corpus(records: list[ManifestRecord], codec, out) -> int:
    """Alpaca-style JSONL: instruction/input/output with empty input."""
    speakers = {rec.speaker_id for rec in records}
    if len(speakers) > 1:
        raise MixedSpeakers(f"records span speakers {sorted(map(str, speakers))}")
    rows = []
    for rec in records:
        if rec.text is None:
            raise ValueError(f"record {rec.id} has no transcript")
        rows.append({
            "instruction": rec.text,
            "input": "",
            "output": _token_literals(rec, codec),
        })
    try:
        with open(out, "w", encoding="utf-8") as fh:
            fh.writelines(json.dumps(row, ensure_ascii=False) + "\n" for row in rows)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return len(rows)

"""End-to-end synthesis: normalization, sentence splitting, parallel
per-sentence generation, decoding, and crossfaded concatenation."""

from __future__ import annotations

import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import codec as codec_mod
from . import tokens as tokens_mod
from .audio import CANONICAL_RATE, Waveform
from .errors import (AllSentencesFailed, EmptyText, NonAudioToken,
                     RateMismatch)

MODE_ZERO_SHOT = "zero_shot"
MODE_SFT = "sft"

CROSSFADE_MS = 10.0
GENERATION_CAP_TOKENS = 1500  # 60 s at 25 Hz, the pipeline's max segment

_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")
_TERMINALS = (".", "!", "?")


def normalize_text(s: str) -> str:
    """Collapse whitespace, capitalize each sentence, ensure terminal punctuation."""
    collapsed = " ".join(s.split())
    if not collapsed:
        raise EmptyText("text is empty or all whitespace")
    chars = list(collapsed)
    sentence_start = True
    for i, ch in enumerate(chars):
        if sentence_start and ch.isalpha():
            chars[i] = ch.upper()
            sentence_start = False
        elif ch in _TERMINALS:
            sentence_start = True
        elif sentence_start and not ch.isspace() and ch not in _TERMINALS:
            # sentence opens with a non-letter (digit, quote, ...); nothing to uppercase
            sentence_start = False
    out = "".join(chars)
    if not out.endswith(_TERMINALS):
        out += "."
    return out


def split_sentences(s: str) -> list[str]:
    """Split after terminal punctuation followed by whitespace; keep delimiters."""
    return [part for part in _SENTENCE_SPLIT_RE.split(s) if part]


def concatenate(segments: list[Waveform], crossfade_ms: float = CROSSFADE_MS) -> Waveform:
    """Join segments with a linear crossfade over each boundary."""
    if not segments:
        return Waveform(np.zeros(0), CANONICAL_RATE)
    rate = segments[0].sample_rate
    for seg in segments[1:]:
        if seg.sample_rate != rate:
            raise RateMismatch("segments carry different sample rates")
    if len(segments) == 1:
        return Waveform(segments[0].samples.copy(), rate)

    fade = int(round(crossfade_ms * rate / 1000.0))
    out = segments[0].samples.copy()
    for seg in segments[1:]:
        overlap = min(fade, len(out), len(seg.samples))
        if overlap == 0:
            out = np.concatenate([out, seg.samples])
            continue
        ramp = np.linspace(0.0, 1.0, overlap, endpoint=False)
        blended = out[-overlap:] * (1.0 - ramp) + seg.samples[:overlap] * ramp
        out = np.concatenate([out[:-overlap], blended, seg.samples[overlap:]])
    return Waveform(out, rate)


@dataclass
class SynthesisRequest:
    target_text: str
    mode: str = MODE_SFT
    ref_text: str = ""
    ref_audio: Optional[Waveform] = None
    seed: int = 0
    max_seconds_per_sentence: float = 60.0
    temperature: float = 0.0
    sft_template: str = tokens_mod.DEFAULT_SFT_TEMPLATE

    def __post_init__(self):
        if self.mode not in (MODE_ZERO_SHOT, MODE_SFT):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == MODE_ZERO_SHOT:
            if not self.ref_text:
                raise ValueError("zero-shot synthesis requires ref_text")
            if self.ref_audio is None or len(self.ref_audio) < 1024:
                raise ValueError("zero-shot synthesis requires ref_audio of >= 1024 samples")


@dataclass
class SynthesisResult:
    audio: Waveform
    t_inf: float
    t_syn: float
    sentence_spans: list[tuple[str, float, float]]
    truncated: bool
    warnings: list[str] = field(default_factory=list)


def _generate_sentence(sentence, index, req, model, vocab, cb, ref_tokens, max_new):
    if req.mode == MODE_ZERO_SHOT:
        prompt = tokens_mod.assemble_zero_shot_prompt(vocab, req.ref_text, sentence,
                                                      ref_tokens)
    else:
        prompt = tokens_mod.render_sft_prompt(vocab, sentence, template=req.sft_template)
    generated = model.generate(prompt, max_new=max_new, seed=req.seed + index,
                               temperature=req.temperature)
    codec_ids, truncated = tokens_mod.parse_generated(vocab, generated)
    return codec_mod.decode(codec_ids, cb), truncated


def synthesize(req: SynthesisRequest, model, vocab, cb, workers: int = 1,
               split: bool = True,
               cap_tokens: int = GENERATION_CAP_TOKENS) -> SynthesisResult:
    """Normalize, split, generate each sentence (seed + sentence index),
    decode, and concatenate with a 10 ms crossfade.

    Parallelism never changes the output: per-sentence seeds are fixed by
    position and results are assembled in sentence order.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    start = time.perf_counter()

    text = normalize_text(req.target_text)
    sentences = split_sentences(text) if split else [text]
    ref_tokens = None
    if req.mode == MODE_ZERO_SHOT:
        ref_tokens = list(codec_mod.encode(req.ref_audio, cb))
    max_new = min(cap_tokens,
                  int(req.max_seconds_per_sentence * cb.token_rate) + 1)

    def worker(item):
        index, sentence = item
        try:
            return _generate_sentence(sentence, index, req, model, vocab, cb,
                                      ref_tokens, max_new)
        except NonAudioToken as exc:
            return exc

    if workers == 1 or len(sentences) == 1:
        outcomes = [worker(item) for item in enumerate(sentences)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(worker, enumerate(sentences)))

    segments, spans_text, warnings = [], [], []
    truncated = False
    for sentence, outcome in zip(sentences, outcomes):
        if isinstance(outcome, NonAudioToken):
            warnings.append(f"skipped sentence {sentence!r}: {outcome}")
            continue
        segment, hit_cap = outcome
        truncated = truncated or hit_cap
        segments.append(segment)
        spans_text.append(sentence)
    if not segments:
        raise AllSentencesFailed("; ".join(warnings) or "no sentences produced audio")

    audio = concatenate(segments)
    t_syn = audio.duration_s
    # span boundaries mirror concatenate's sample arithmetic, including
    # its clamped overlap on segments shorter than the crossfade
    fade_n = int(round(CROSSFADE_MS * audio.sample_rate / 1000.0))
    rate = audio.sample_rate
    bounds = [0.0]
    cum = len(segments[0])
    for segment in segments[1:]:
        overlap = min(fade_n, cum, len(segment))
        bounds.append(max(bounds[-1], (cum - overlap) / rate))
        cum = cum - overlap + len(segment)
    spans = [
        (sentence, bounds[i],
         t_syn if i == len(segments) - 1 else bounds[i + 1])
        for i, sentence in enumerate(spans_text)
    ]
    t_inf = time.perf_counter() - start
    return SynthesisResult(audio=audio, t_inf=t_inf, t_syn=t_syn,
                           sentence_spans=spans, truncated=truncated,
                           warnings=warnings)

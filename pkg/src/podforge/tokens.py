"""Merged text/audio token vocabulary and every sequence format built on it.

Text ids occupy [0, V_text) with <unk> at id 0; the 1024 audio literals
<|audio_token_0|>..<|audio_token_1023|> follow contiguously, and
<|audio_token_end|> is the final id.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import EmptyAudio, EmptyCorpus, NonAudioToken

N_AUDIO_TOKENS = 1024
END_LITERAL = "<|audio_token_end|>"
UNK_LITERAL = "<unk>"

DEFAULT_SFT_TEMPLATE = "[SYS] You are a speech synthesizer. [USER] {instruction} [ASSISTANT] "

_TEXT_TOKEN_RE = re.compile(r"\w+|[^\w\s]")
_AUDIO_LITERAL_RE = re.compile(r"<\|audio_token_(\d+|end)\|>")


def audio_token_literal(codec_id: int) -> str:
    if not 0 <= codec_id < N_AUDIO_TOKENS:
        raise ValueError(f"audio token id {codec_id} outside [0, {N_AUDIO_TOKENS})")
    return f"<|audio_token_{codec_id}|>"


def tokenize_text(s: str) -> list[str]:
    """Lowercased word-level tokens with punctuation standing alone."""
    return _TEXT_TOKEN_RE.findall(s.lower())


@dataclass
class MergedVocab:
    id_to_token: list[str]
    token_to_id: dict[str, int] = field(init=False, repr=False)
    n_text: int = field(init=False)

    def __post_init__(self):
        self.token_to_id = {tok: i for i, tok in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("duplicate literals in vocabulary")
        self.n_text = len(self.id_to_token) - N_AUDIO_TOKENS - 1

    def __len__(self) -> int:
        return len(self.id_to_token)

    @property
    def unk_id(self) -> int:
        return 0

    @property
    def audio_base(self) -> int:
        return self.n_text

    @property
    def end_id(self) -> int:
        return len(self.id_to_token) - 1

    def id_of(self, literal: str) -> int:
        """Exact literal lookup; unknown literals are rejected."""
        return self.token_to_id[literal]

    def literal_of(self, token_id: int) -> str:
        return self.id_to_token[token_id]

    def audio_id(self, codec_id: int) -> int:
        """Map a codec token id [0, 1024) to its merged-vocabulary id."""
        if not 0 <= codec_id < N_AUDIO_TOKENS:
            raise ValueError(f"audio token id {codec_id} outside [0, {N_AUDIO_TOKENS})")
        return self.audio_base + codec_id

    def codec_id(self, merged_id: int) -> int:
        if not self.is_audio_id(merged_id):
            raise ValueError(f"id {merged_id} is not an audio token")
        return merged_id - self.audio_base

    def is_audio_id(self, merged_id: int) -> bool:
        return self.audio_base <= merged_id < self.end_id

    def is_text_id(self, merged_id: int) -> bool:
        return 0 <= merged_id < self.n_text

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for tok in self.id_to_token:
                fh.write(tok + "\n")

    @classmethod
    def load(cls, path) -> "MergedVocab":
        with open(path, "r", encoding="utf-8") as fh:
            tokens = [line.rstrip("\n") for line in fh]
        while tokens and tokens[-1] == "":
            tokens.pop()
        return cls(tokens)


def build_vocab(text_corpus: list[str]) -> MergedVocab:
    """Word-level text vocabulary (appearance order) plus the audio/end entries."""
    if not text_corpus:
        raise EmptyCorpus("vocabulary needs a non-empty text corpus")
    table = [UNK_LITERAL]
    seen = {UNK_LITERAL}
    for text in text_corpus:
        for tok in tokenize_text(text):
            if tok not in seen:
                seen.add(tok)
                table.append(tok)
    table.extend(audio_token_literal(i) for i in range(N_AUDIO_TOKENS))
    table.append(END_LITERAL)
    return MergedVocab(table)


def encode_text(vocab: MergedVocab, s: str) -> list[int]:
    return [vocab.token_to_id.get(tok, vocab.unk_id) for tok in tokenize_text(s)]


def assemble_pretrain_line(vocab: MergedVocab, text: str, audio: list[int]) -> list[int]:
    """text ids ++ audio ids ++ end id, with no separator between modalities."""
    if len(audio) == 0:
        raise EmptyAudio("pretrain line needs at least one audio token")
    ids = encode_text(vocab, text)
    ids.extend(vocab.audio_id(int(a)) for a in audio)
    ids.append(vocab.end_id)
    return ids


def assemble_zero_shot_prompt(vocab: MergedVocab, ref_text: str, target_text: str,
                              ref_audio: list[int]) -> list[int]:
    """Continuation prompt: ref text ++ target text ++ ref audio, no end token."""
    if len(ref_audio) == 0:
        raise EmptyAudio("zero-shot prompt needs reference audio tokens")
    ids = encode_text(vocab, ref_text)
    ids.extend(encode_text(vocab, target_text))
    ids.extend(vocab.audio_id(int(a)) for a in ref_audio)
    return ids


def render_sft_prompt(vocab: MergedVocab, instruction: str,
                      template: str = DEFAULT_SFT_TEMPLATE) -> list[int]:
    """Instruction wrapped in the fixed chat template, then tokenized.

    The same template must be used at training and inference time.
    """
    return encode_text(vocab, template.format(instruction=instruction))


def parse_generated(vocab: MergedVocab, ids: list[int]) -> tuple[list[int], bool]:
    """Extract codec ids from a generated sequence.

    Reads up to the end token (stripped). Returns (codec_ids, truncated)
    where truncated means the sequence ran out before an end token.
    """
    out = []
    for pos, tid in enumerate(ids):
        if tid == vocab.end_id:
            return out, False
        if not vocab.is_audio_id(tid):
            raise NonAudioToken(pos)
        out.append(vocab.codec_id(tid))
    return out, True


def serialize(vocab: MergedVocab, ids: list[int]) -> str:
    """Render ids as literals: text tokens space-joined, audio/end glued."""
    parts = []
    prev_audio = False
    for tid in ids:
        is_audio = vocab.is_audio_id(tid) or tid == vocab.end_id
        literal = vocab.literal_of(tid)
        if parts and not (is_audio and prev_audio):
            parts.append(" ")
        parts.append(literal)
        prev_audio = is_audio
    return "".join(parts)


def tokenize_merged(vocab: MergedVocab, line: str) -> list[int]:
    """Tokenize a line that may interleave text with audio-token literals."""
    ids = []
    pos = 0
    for match in _AUDIO_LITERAL_RE.finditer(line):
        ids.extend(encode_text(vocab, line[pos:match.start()]))
        ids.append(vocab.id_of(match.group(0)))
        pos = match.end()
    ids.extend(encode_text(vocab, line[pos:]))
    return ids


def split_corpus_line(line: str) -> tuple[str, str]:
    """Split a pretrain corpus line into (transcript, audio-literal tail)."""
    match = _AUDIO_LITERAL_RE.search(line)
    if match is None:
        return line.rstrip(), ""
    return line[:match.start()].rstrip(), line[match.start():].rstrip()

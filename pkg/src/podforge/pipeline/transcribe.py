"""ASR slot: transcriber interface, ground-truth lookup, and the
external-process wire contract shared with quality scorers.

External contract: the child process reads one WAV path per line on
stdin and writes one result line (transcript, or decimal score) per
input line on stdout; a nonzero exit is a stage failure.
"""

from __future__ import annotations

import hashlib
import subprocess
import tempfile
from pathlib import Path

import numpy as np

from ..audio import Waveform, save_wav
from ..errors import StageFailure, TranscriberFailure
from .manifest import _STAGE_ORDER, ManifestRecord
from .quality import QualityScorer


class Transcriber:
    """Waveform -> transcript; must be deterministic."""

    name = "transcriber"

    def transcribe(self, w: Waveform) -> str:
        raise NotImplementedError


def waveform_digest(w: Waveform) -> str:
    """Content digest stable across a 16-bit save/load round trip."""
    quantized = np.clip(np.round(w.samples * 32768.0), -32768, 32767).astype("<i2")
    h = hashlib.sha256(quantized.tobytes())
    h.update(str(w.sample_rate).encode())
    return h.hexdigest()


class LookupTranscriber(Transcriber):
    """Ground-truth table keyed by audio content; for synthetic fixtures."""

    name = "lookup"

    def __init__(self):
        self._table: dict[str, str] = {}

    def register(self, w: Waveform, text: str) -> None:
        self._table[waveform_digest(w)] = text

    def transcribe(self, w: Waveform) -> str:
        digest = waveform_digest(w)
        if digest not in self._table:
            raise TranscriberFailure("no registered transcript for this audio")
        return self._table[digest]


def run_lines_process(cmd: list[str], lines: list[str], stage_name: str) -> list[str]:
    """Feed lines to a child process, one per line; collect one reply each."""
    try:
        proc = subprocess.run(
            cmd, input="".join(line + "\n" for line in lines),
            capture_output=True, text=True,
        )
    except OSError as exc:
        raise StageFailure(stage_name, str(exc)) from exc
    if proc.returncode != 0:
        raise StageFailure(stage_name, f"exit code {proc.returncode}: {proc.stderr.strip()}")
    replies = proc.stdout.splitlines()
    if len(replies) != len(lines):
        raise StageFailure(stage_name, f"expected {len(lines)} reply lines, got {len(replies)}")
    return replies


class ExternalProcessTranscriber(Transcriber):
    name = "external_transcriber"

    def __init__(self, cmd: list[str]):
        self.cmd = list(cmd)

    def transcribe(self, w: Waveform) -> str:
        with tempfile.TemporaryDirectory(prefix="podforge_asr_") as tmp:
            path = Path(tmp) / "input.wav"
            save_wav(w, path)
            try:
                return run_lines_process(self.cmd, [str(path)], self.name)[0]
            except StageFailure as exc:
                raise TranscriberFailure(str(exc)) from exc


class ExternalProcessScorer(QualityScorer):
    name = "external_scorer"

    def __init__(self, cmd: list[str]):
        self.cmd = list(cmd)

    def score(self, w: Waveform) -> float:
        with tempfile.TemporaryDirectory(prefix="podforge_mos_") as tmp:
            path = Path(tmp) / "input.wav"
            save_wav(w, path)
            reply = run_lines_process(self.cmd, [str(path)], self.name)[0]
        try:
            return float(reply)
        except ValueError as exc:
            raise StageFailure(self.name, f"non-numeric score {reply!r}") from exc


def transcribe(w: Waveform, t: Transcriber, record: ManifestRecord) -> ManifestRecord:
    """Attach the transcript and advance the record."""
    if _STAGE_ORDER[record.stage] < _STAGE_ORDER["speaker_filtered"]:
        raise ValueError(f"record {record.id} at stage {record.stage!r} is not ready to transcribe")
    try:
        record.text = t.transcribe(w)
    except TranscriberFailure:
        raise
    except Exception as exc:
        raise TranscriberFailure(str(exc)) from exc
    record.advance("transcribed")
    return record

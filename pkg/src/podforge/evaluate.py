"""Batch evaluation producing WER/MOS/SIM/speed reports.

Protocol: records are synthesized one at a time with sentence splitting
and parallelism disabled, then transcribed, embedded, and scored; the
report aggregates means into one row per (model, dataset).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import codec as codec_mod
from . import tokens as tokens_mod
from .audio import CANONICAL_RATE, Waveform, load_wav, resample
from .engine import MODE_ZERO_SHOT, SynthesisRequest, synthesize
from .errors import IoFailure, PodforgeError
from .metrics import sim, speed_ratio, wer
from .pipeline.corpus import load_record_audio
from .pipeline.manifest import ManifestRecord
from .pipeline.quality import score_quality

REPORT_COLUMNS = ("model_name", "dataset_name", "wer_pct", "mos", "sim", "r")


@dataclass
class EvalReport:
    rows: list[dict]
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"rows": self.rows, "metadata": self.metadata},
                          ensure_ascii=False, indent=2, sort_keys=True)

    def save(self, path) -> None:
        try:
            Path(path).write_text(self.to_json() + "\n", encoding="utf-8")
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        data = json.loads(text)
        return cls(rows=data["rows"], metadata=data["metadata"])

    @classmethod
    def load(cls, path) -> "EvalReport":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def render_table(self) -> str:
        headers = ("Model", "Dataset", "WER(%)", "MOS", "SIM", "r")
        body = [
            (row["model_name"], row["dataset_name"], f"{row['wer_pct']:.2f}",
             f"{row['mos']:.2f}", f"{row['sim']:.2f}", f"{row['r']:.2f}")
            for row in self.rows
        ]
        widths = [max(len(h), *(len(r[i]) for r in body)) if body else len(h)
                  for i, h in enumerate(headers)]
        def fmt(cells):
            return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
        lines = [fmt(headers), fmt(tuple("-" * w for w in widths))]
        lines.extend(fmt(r) for r in body)
        return "\n".join(lines)


def render_speed_table(ratios: dict[str, float]) -> str:
    """Single-metric speed table: one column per model, one row of r values."""
    names = list(ratios)
    cells = [f"{ratios[name]:.2f}" for name in names]
    widths = [max(len(n), len(c)) for n, c in zip(names, cells)]
    header = "Model  " + "  ".join(n.ljust(w) for n, w in zip(names, widths))
    row = "r      " + "  ".join(c.ljust(w) for c, w in zip(cells, widths))
    return header.rstrip() + "\n" + row.rstrip()


def _load_eval_rows(dataset_path) -> list[dict]:
    rows = []
    with open(dataset_path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    return rows


def _reference_audio(row: dict, rec: ManifestRecord, mode: str) -> Waveform:
    if mode == MODE_ZERO_SHOT:
        ref = load_wav(row["ref_audio_path"])
        if ref.sample_rate != CANONICAL_RATE:
            ref = resample(ref, CANONICAL_RATE)
        return ref
    return load_record_audio(rec)


def run_eval(dataset, model, vocab, cb, transcriber, scorer, mode: str, seed: int,
             model_name: str = "builtin-ngram", temperature: float = 0.0,
             sft_template: str = tokens_mod.DEFAULT_SFT_TEMPLATE,
             config_digest: str = "") -> EvalReport:
    """Evaluate every dataset record; failures are excluded and counted."""
    raw_rows = _load_eval_rows(dataset)
    dataset_name = Path(dataset).stem

    sums = {"wer": 0.0, "mos": 0.0, "sim": 0.0, "r": 0.0}
    n_ok = 0
    failures = []
    audio_first = 0
    for index, row in enumerate(raw_rows):
        try:
            rec = ManifestRecord.from_dict(row)
            if rec.text is None:
                raise ValueError(f"record {rec.id} has no ground-truth text")
            reference = _reference_audio(row, rec, mode)
            request = SynthesisRequest(
                target_text=rec.text, mode=mode,
                ref_text=row.get("ref_text", ""),
                ref_audio=reference if mode == MODE_ZERO_SHOT else None,
                seed=seed + index, temperature=temperature,
                sft_template=sft_template,
            )
            result = synthesize(request, model, vocab, cb, workers=1, split=False)

            # soft modality-adherence diagnostic: first generated id
            sentence = result.sentence_spans[0][0]
            if request.mode == MODE_ZERO_SHOT:
                prompt = tokens_mod.assemble_zero_shot_prompt(
                    vocab, request.ref_text, sentence,
                    [int(t) for t in codec_mod.encode(reference, cb)])
            else:
                prompt = tokens_mod.render_sft_prompt(vocab, sentence,
                                                      template=sft_template)
            first = model.generate(prompt, max_new=1, seed=seed + index,
                                   temperature=temperature)
            first_is_audio = bool(first) and vocab.is_audio_id(first[0])

            hypothesis = transcriber.transcribe(result.audio)
            sums["wer"] += wer(rec.text, hypothesis)
            sums["sim"] += sim(result.audio, reference)
            sums["mos"] += score_quality(result.audio, scorer)
            sums["r"] += speed_ratio(result.t_inf, result.t_syn).r
            audio_first += first_is_audio
            n_ok += 1
        except (PodforgeError, ValueError, KeyError, OSError) as exc:
            failures.append(f"record {index}: {exc}")

    rows = []
    if n_ok:
        rows.append({
            "model_name": model_name,
            "dataset_name": dataset_name,
            "wer_pct": 100.0 * sums["wer"] / n_ok,
            "mos": sums["mos"] / n_ok,
            "sim": sums["sim"] / n_ok,
            "r": sums["r"] / n_ok,
        })
    metadata = {
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "config_digest": config_digest,
        "seed": seed,
        "mode": mode,
        "records_total": len(raw_rows),
        "records_evaluated": n_ok,
        "records_failed": len(failures),
        "failures": failures,
        "modality_adherence": (audio_first / n_ok) if n_ok else None,
    }
    return EvalReport(rows=rows, metadata=metadata)

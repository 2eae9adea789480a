"""Command-line driver for every pipeline, training, synthesis, and
evaluation stage.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import codec as codec_mod
from . import engine, evaluate, lm
from . import tokens as tokens_mod
from .audio import CANONICAL_RATE, Waveform, load_wav, resample, save_wav
from .config import AppConfig, load_config
from .errors import InsufficientData, PodforgeError
from .pipeline import (DEFAULT_STAGES, ExternalProcessScorer,
                       ExternalProcessTranscriber, LookupTranscriber,
                       ManifestRecord, SnrProxyScorer, apply_cleaning,
                       build_pretrain_corpus, build_sft_corpus, chunk_audio,
                       filter_quality, filter_single_speaker,
                       load_record_audio, read_manifest, score_quality,
                       segment_utterances, transcribe, write_manifest)
from .server import SynthesisService, serve_forever


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="podforge", description=__doc__)
    parser.add_argument("--config", help="key=value config file (or set PODFORGE_CONFIG)")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("ingest", help="chunk source audio into 60 s pieces")
    p.add_argument("--audio", required=True, nargs="+", help="source WAV files")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--manifest", required=True, help="output manifest path")

    p = sub.add_parser("clean", help="canonicalize to 16 kHz and run the cleaning chain")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--out-manifest", required=True)

    p = sub.add_parser("segment", help="energy-VAD utterance segmentation")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--out-manifest", required=True)

    p = sub.add_parser("score", help="estimate MOS and filter on the pipeline threshold")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-manifest", required=True)
    p.add_argument("--dropped-manifest")
    p.add_argument("--threshold", type=float)
    p.add_argument("--scorer-cmd", nargs="+", help="external scorer command")

    p = sub.add_parser("filter-speaker", help="retain single-speaker utterances")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-manifest", required=True)
    p.add_argument("--speaker-id", help="stamp retained records with this speaker id")

    p = sub.add_parser("transcribe", help="attach transcripts")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-manifest", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--table", help="JSON file mapping record id to transcript")
    group.add_argument("--cmd", nargs="+", help="external transcriber command")

    p = sub.add_parser("format-pretrain", help="emit the unsupervised corpus")
    p.add_argument("--manifest", required=True)
    p.add_argument("--codec", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("format-sft", help="emit the instruction-tuning corpus")
    p.add_argument("--manifest", required=True)
    p.add_argument("--codec", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train-codec", help="fit the vector-quantizer codebook")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("train-lm", help="train the reference n-gram model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", choices=("pretrain", "sft"), default="pretrain")
    p.add_argument("--model-out", required=True)
    p.add_argument("--vocab-out", help="defaults to the model path with .vocab suffix")
    p.add_argument("--order", type=int)

    p = sub.add_parser("synth", help="synthesize speech for a text")
    p.add_argument("--mode", choices=(engine.MODE_SFT, engine.MODE_ZERO_SHOT),
                   default=engine.MODE_SFT)
    p.add_argument("--text", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--codec", required=True)
    p.add_argument("--vocab", help="defaults to the model path with .vocab suffix")
    p.add_argument("--out", required=True)
    p.add_argument("--ref-text")
    p.add_argument("--ref-audio")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--temperature", type=float)

    p = sub.add_parser("eval", help="run the evaluation harness over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--codec", required=True)
    p.add_argument("--vocab")
    p.add_argument("--mode", choices=(engine.MODE_SFT, engine.MODE_ZERO_SHOT),
                   default=engine.MODE_SFT)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--model-name", default="builtin-ngram")
    p.add_argument("--seed", type=int)
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--transcriber-cmd", required=True, nargs="+")
    p.add_argument("--scorer-cmd", nargs="+")

    p = sub.add_parser("serve", help="start the HTTP synthesis service")
    p.add_argument("--model", required=True)
    p.add_argument("--codec", required=True)
    p.add_argument("--vocab")
    p.add_argument("--bind")
    p.add_argument("--backend", help="external LLM backend endpoint")
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int)

    return parser


def _config_from_args(args) -> AppConfig:
    overrides = {}
    for key in ("seed", "workers", "temperature"):
        if getattr(args, key, None) is not None:
            overrides[key] = getattr(args, key)
    if getattr(args, "threshold", None) is not None:
        overrides["mos_threshold_pipeline"] = args.threshold
    if getattr(args, "order", None) is not None:
        overrides["ngram_order"] = args.order
    if getattr(args, "k", None) is not None:
        overrides["codebook_size"] = args.k
    if getattr(args, "bind", None) is not None:
        overrides["http_bind"] = args.bind
    if getattr(args, "backend", None) is not None:
        overrides["backend"] = args.backend
    return load_config(args.config, overrides)


def _vocab_path(args) -> Path:
    if getattr(args, "vocab", None):
        return Path(args.vocab)
    return Path(args.model).with_suffix(".vocab")


def _load_canonical(path) -> Waveform:
    w = load_wav(path)
    if w.sample_rate != CANONICAL_RATE:
        w = resample(w, CANONICAL_RATE)
    return w


def cmd_ingest(args, cfg: AppConfig) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for source in args.audio:
        w = load_wav(source)
        stem = Path(source).stem
        for chunk, rec in chunk_audio(w, cfg.chunk_s, source_path=source,
                                      id_prefix=f"{stem}_chunk"):
            path = out_dir / f"{rec.id}.wav"
            save_wav(chunk, path)
            rec.source_path = str(path)
            rec.start_s, rec.end_s = 0.0, chunk.duration_s
            rec.duration_s = chunk.duration_s
            records.append(rec)
    write_manifest(records, args.manifest)
    print(f"ingested {len(records)} chunks")
    return 0


def cmd_clean(args, cfg: AppConfig) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = read_manifest(args.manifest)
    for rec in records:
        w = _load_canonical(rec.source_path)
        cleaned = apply_cleaning(w, DEFAULT_STAGES)
        path = out_dir / f"{rec.id}.wav"
        save_wav(cleaned, path)
        rec.source_path = str(path)
        rec.start_s, rec.end_s = 0.0, cleaned.duration_s
        rec.duration_s = cleaned.duration_s
        rec.sample_rate = cleaned.sample_rate
        rec.advance("cleaned")
    write_manifest(records, args.out_manifest)
    print(f"cleaned {len(records)} chunks")
    return 0


def cmd_segment(args, cfg: AppConfig) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_records = []
    for rec in read_manifest(args.manifest):
        w = load_wav(rec.source_path)
        pieces = segment_utterances(w, cfg.min_segment_s, cfg.max_segment_s,
                                    source_path=rec.source_path,
                                    id_prefix=f"{rec.id}_seg")
        for segment, seg_rec in pieces:
            path = out_dir / f"{seg_rec.id}.wav"
            save_wav(segment, path)
            seg_rec.source_path = str(path)
            seg_rec.start_s, seg_rec.end_s = 0.0, segment.duration_s
            seg_rec.duration_s = segment.duration_s
            out_records.append(seg_rec)
    write_manifest(out_records, args.out_manifest)
    print(f"segmented into {len(out_records)} utterances")
    return 0


def cmd_score(args, cfg: AppConfig) -> int:
    scorer = ExternalProcessScorer(args.scorer_cmd) if args.scorer_cmd else SnrProxyScorer()
    records = read_manifest(args.manifest)
    for rec in records:
        rec.mos = score_quality(load_wav(rec.source_path), scorer)
    kept, dropped = filter_quality(records, cfg.mos_threshold_pipeline)
    write_manifest(kept, args.out_manifest)
    if args.dropped_manifest:
        write_manifest(dropped, args.dropped_manifest)
    print(f"kept {len(kept)} of {len(records)} records above mos {cfg.mos_threshold_pipeline}")
    return 0


def cmd_filter_speaker(args, cfg: AppConfig) -> int:
    kept = []
    for rec in read_manifest(args.manifest):
        result = filter_single_speaker(load_wav(rec.source_path), rec)
        if result is not None:
            if args.speaker_id:
                result.speaker_id = args.speaker_id
            kept.append(result)
    write_manifest(kept, args.out_manifest)
    print(f"retained {len(kept)} single-speaker records")
    return 0


def cmd_transcribe(args, cfg: AppConfig) -> int:
    records = read_manifest(args.manifest)
    if args.cmd:
        transcriber = ExternalProcessTranscriber(args.cmd)
        for rec in records:
            transcribe(load_wav(rec.source_path), transcriber, rec)
    else:
        table = json.loads(Path(args.table).read_text(encoding="utf-8"))
        transcriber = LookupTranscriber()
        loaded = [(rec, load_wav(rec.source_path)) for rec in records]
        for rec, w in loaded:
            if rec.id not in table:
                raise PodforgeError(f"no transcript for record {rec.id} in {args.table}")
            transcriber.register(w, table[rec.id])
        for rec, w in loaded:
            transcribe(w, transcriber, rec)
    write_manifest(records, args.out_manifest)
    print(f"transcribed {len(records)} records")
    return 0


def cmd_format_pretrain(args, cfg: AppConfig) -> int:
    records = read_manifest(args.manifest)
    cb = codec_mod.Codebook.load(args.codec)
    count = build_pretrain_corpus(records, cb, args.out)
    print(f"wrote {count} pretrain lines to {args.out}")
    return 0


def cmd_format_sft(args, cfg: AppConfig) -> int:
    records = read_manifest(args.manifest)
    cb = codec_mod.Codebook.load(args.codec)
    count = build_sft_corpus(records, cb, args.out)
    print(f"wrote {count} SFT records to {args.out}")
    return 0


def cmd_train_codec(args, cfg: AppConfig) -> int:
    records = read_manifest(args.manifest)
    eligible = [rec for rec in records
                if rec.mos is not None and rec.mos > cfg.mos_threshold_decoder]
    if not eligible:
        raise InsufficientData(
            f"no records with mos > {cfg.mos_threshold_decoder} in {args.manifest}")
    corpus = [load_record_audio(rec) for rec in eligible]
    cb = codec_mod.train_codebook(corpus, k=cfg.codebook_size, seed=cfg.seed)
    cb.save(args.out)
    print(f"trained {cb.size}-entry codebook on {len(eligible)} records -> {args.out}")
    return 0


def _read_training_sequences(path, fmt, template):
    """Returns (vocab, token sequences) for a corpus file."""
    lines = [line.rstrip("\n") for line in
             Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]
    if fmt == "pretrain":
        texts = [tokens_mod.split_corpus_line(line)[0] for line in lines]
        vocab = tokens_mod.build_vocab(texts)
        seqs = [tokens_mod.tokenize_merged(vocab, line) for line in lines]
    else:
        rows = [json.loads(line) for line in lines]
        rendered = [template.format(instruction=row["instruction"]) for row in rows]
        vocab = tokens_mod.build_vocab(rendered)
        seqs = []
        for row, prompt_text in zip(rows, rendered):
            seq = tokens_mod.encode_text(vocab, prompt_text)
            seq.extend(tokens_mod.tokenize_merged(vocab, row["output"]))
            seqs.append(seq)
    return vocab, seqs


def cmd_train_lm(args, cfg: AppConfig) -> int:
    vocab, seqs = _read_training_sequences(args.corpus, args.format, cfg.sft_template)
    model = lm.train(seqs, vocab_size=len(vocab), order=cfg.ngram_order,
                     alpha=cfg.backoff_alpha)
    model.save(args.model_out)
    vocab_path = args.vocab_out or Path(args.model_out).with_suffix(".vocab")
    vocab.save(vocab_path)
    print(f"trained order-{model.order} model on {len(seqs)} sequences "
          f"(vocab {len(vocab)}) -> {args.model_out}")
    return 0


def _load_artifacts(args):
    model = lm.NGramModel.load(args.model)
    vocab = tokens_mod.MergedVocab.load(_vocab_path(args))
    cb = codec_mod.Codebook.load(args.codec)
    return model, vocab, cb


def cmd_synth(args, cfg: AppConfig) -> int:
    model, vocab, cb = _load_artifacts(args)
    ref_audio = _load_canonical(args.ref_audio) if args.ref_audio else None
    request = engine.SynthesisRequest(
        target_text=args.text, mode=args.mode, ref_text=args.ref_text or "",
        ref_audio=ref_audio, seed=cfg.seed, temperature=cfg.temperature,
        sft_template=cfg.sft_template,
    )
    result = engine.synthesize(request, model, vocab, cb, workers=cfg.workers,
                               cap_tokens=cfg.generation_cap_tokens)
    save_wav(result.audio, args.out)
    print(f"wrote {result.t_syn:.2f} s of audio to {args.out} "
          f"(t_inf {result.t_inf:.2f} s, truncated={result.truncated})")
    return 0


def cmd_eval(args, cfg: AppConfig) -> int:
    model, vocab, cb = _load_artifacts(args)
    transcriber = ExternalProcessTranscriber(args.transcriber_cmd)
    scorer = ExternalProcessScorer(args.scorer_cmd) if args.scorer_cmd else SnrProxyScorer()
    report = evaluate.run_eval(
        args.manifest, model, vocab, cb, transcriber, scorer, mode=args.mode,
        seed=cfg.seed, model_name=args.model_name, temperature=args.temperature,
        sft_template=cfg.sft_template, config_digest=cfg.digest(),
    )
    report.save(args.out)
    print(report.render_table())
    return 0


def cmd_serve(args, cfg: AppConfig) -> int:
    model, vocab, cb = _load_artifacts(args)
    service = SynthesisService(model=model, vocab=vocab, codebook=cb, config=cfg,
                               backend_endpoint=cfg.backend)
    serve_forever(service, cfg.http_bind)
    return 0


_HANDLERS = {
    "ingest": cmd_ingest,
    "clean": cmd_clean,
    "segment": cmd_segment,
    "score": cmd_score,
    "filter-speaker": cmd_filter_speaker,
    "transcribe": cmd_transcribe,
    "format-pretrain": cmd_format_pretrain,
    "format-sft": cmd_format_sft,
    "train-codec": cmd_train_codec,
    "train-lm": cmd_train_lm,
    "synth": cmd_synth,
    "eval": cmd_eval,
    "serve": cmd_serve,
}


def cli_dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        cfg = _config_from_args(args)
        return _HANDLERS[args.command](args, cfg)
    except (PodforgeError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()

"""Corpus construction pipeline: chunking, cleaning, segmentation,
quality and speaker filtering, transcription, and corpus emission."""

from .cleaning import (CleaningStage, DEFAULT_STAGES, HighpassStage,
                       SpectralGateStage, apply_cleaning)
from .corpus import build_pretrain_corpus, build_sft_corpus, load_record_audio
from .manifest import STAGES, ManifestRecord, read_manifest, write_manifest
from .quality import QualityScorer, SnrProxyScorer, filter_quality, score_quality
from .segment import chunk_audio, segment_utterances
from .speakers import filter_single_speaker
from .transcribe import (ExternalProcessScorer, ExternalProcessTranscriber,
                         LookupTranscriber, Transcriber, transcribe,
                         waveform_digest)

__all__ = [
    "CleaningStage", "DEFAULT_STAGES", "HighpassStage", "SpectralGateStage",
    "apply_cleaning", "build_pretrain_corpus", "build_sft_corpus",
    "load_record_audio", "STAGES", "ManifestRecord", "read_manifest",
    "write_manifest", "QualityScorer", "SnrProxyScorer", "filter_quality",
    "score_quality", "chunk_audio", "segment_utterances",
    "filter_single_speaker", "ExternalProcessScorer",
    "ExternalProcessTranscriber", "LookupTranscriber", "Transcriber",
    "transcribe", "waveform_digest",
]

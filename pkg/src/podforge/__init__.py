"""podforge: desk-scale cascade text-to-speech toolkit.

Pipeline from raw podcast-style audio to tokenized corpora, a trainable
vector-quantized audio codec, an autoregressive token model slot,
parallel sentence-level synthesis, and a WER/SIM/MOS/speed evaluation
harness, all driven by one CLI and an HTTP service.
"""

from .audio import Waveform, load_wav, resample, save_wav
from .codec import Codebook, decode, encode, train_codebook
from .config import AppConfig, load_config
from .engine import SynthesisRequest, SynthesisResult, synthesize
from .evaluate import EvalReport, run_eval
from .metrics import sim, speaker_embedding, speed_ratio, wer
from .tokens import MergedVocab, build_vocab

__version__ = "0.1.0"

__all__ = [
    "Waveform", "load_wav", "resample", "save_wav",
    "Codebook", "decode", "encode", "train_codebook",
    "AppConfig", "load_config",
    "SynthesisRequest", "SynthesisResult", "synthesize",
    "EvalReport", "run_eval",
    "sim", "speaker_embedding", "speed_ratio", "wer",
    "MergedVocab", "build_vocab",
    "__version__",
]

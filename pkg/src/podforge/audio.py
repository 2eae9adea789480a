"""Audio I/O, resampling, framing, and spectral features.

Everything downstream standardizes on 16 kHz mono. Framing uses a
1024-sample window with a 640-sample hop, which yields exactly 25
frames per second at 16 kHz.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .errors import IoFailure, MalformedContainer, TooShort, UnsupportedEncoding

CANONICAL_RATE = 16000
WINDOW = 1024
HOP = 640
TOKEN_RATE = CANONICAL_RATE // HOP  # 25 Hz
N_FFT_BINS = WINDOW // 2 + 1  # 513
N_MEL_FILTERS = 40
N_MFCC = 13
LOG_FLOOR = 1e-10

KIND_MAGNITUDE = "magnitude_spectrum"
KIND_MFCC = "mfcc"


@dataclass
class Waveform:
    """Mono PCM audio: float samples in [-1, 1] plus a sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("waveform samples must be one-dimensional (mono)")
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate

    def __len__(self) -> int:
        return len(self.samples)


@dataclass
class FeatureMatrix:
    """T x D frame features at a fixed frame rate."""

    frames: np.ndarray
    frame_rate: float
    kind: str


def frame_count(n_samples: int, window: int = WINDOW, hop: int = HOP) -> int:
    """Number of full analysis frames in a signal of n_samples."""
    if n_samples < window:
        return 0
    return (n_samples - window) // hop + 1


def _frame_signal(samples: np.ndarray, window: int, hop: int) -> np.ndarray:
    n = frame_count(len(samples), window, hop)
    if n == 0:
        raise TooShort(f"need at least {window} samples, got {len(samples)}")
    idx = np.arange(window)[None, :] + hop * np.arange(n)[:, None]
    return samples[idx]


def load_wav(path) -> Waveform:
    """Read a RIFF/WAVE file containing 16-bit PCM, 1 or 2 channels.

    Stereo is downmixed to mono by averaging; samples are scaled to
    [-1, 1] by 1/32768.
    """
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc

    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedContainer(f"{path}: not a RIFF/WAVE file")

    fmt = None
    pcm = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        (chunk_size,) = struct.unpack("<I", data[pos + 4:pos + 8])
        body = data[pos + 8:pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise MalformedContainer(f"{path}: truncated fmt chunk")
            fmt = struct.unpack("<HHIIHH", body[:16])
        elif chunk_id == b"data":
            pcm = body
        pos += 8 + chunk_size + (chunk_size & 1)  # chunks are word-aligned

    if fmt is None or pcm is None:
        raise MalformedContainer(f"{path}: missing fmt or data chunk")

    audio_format, channels, sample_rate, _, _, bits = fmt
    if audio_format != 1 or bits != 16:
        raise UnsupportedEncoding(
            f"{path}: only 16-bit PCM supported (format={audio_format}, bits={bits})"
        )
    if channels not in (1, 2):
        raise UnsupportedEncoding(f"{path}: {channels} channels unsupported")

    raw = np.frombuffer(pcm[: len(pcm) - len(pcm) % (2 * channels)], dtype="<i2")
    if channels == 2:
        raw = raw.reshape(-1, 2).mean(axis=1)
    samples = np.asarray(raw, dtype=np.float64) / 32768.0
    return Waveform(samples, sample_rate)


def wav_bytes(w: Waveform) -> bytes:
    """Serialize to an in-memory 16-bit PCM mono RIFF/WAVE blob."""
    quantized = np.clip(np.round(w.samples * 32768.0), -32768, 32767).astype("<i2")
    pcm = quantized.tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(pcm)) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH", 16, 1, 1, w.sample_rate, w.sample_rate * 2, 2, 16
    )
    header += b"data" + struct.pack("<I", len(pcm))
    return header + pcm


def save_wav(w: Waveform, path) -> None:
    """Write 16-bit PCM mono; round-trips within one quantization step."""
    try:
        with open(path, "wb") as fh:
            fh.write(wav_bytes(w))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def resample(w: Waveform, target_rate: int) -> Waveform:
    """Linear-interpolation resampling to target_rate."""
    if target_rate <= 0:
        raise ValueError("target rate must be positive")
    if target_rate == w.sample_rate:
        return Waveform(w.samples.copy(), w.sample_rate)
    n_out = int(round(len(w.samples) * target_rate / w.sample_rate))
    if n_out == 0 or len(w.samples) == 0:
        return Waveform(np.zeros(0), target_rate)
    t_out = np.arange(n_out) / target_rate
    t_in = np.arange(len(w.samples)) / w.sample_rate
    return Waveform(np.interp(t_out, t_in, w.samples), target_rate)


def _mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_inv(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def mel_filterbank(n_filters: int = N_MEL_FILTERS, n_bins: int = N_FFT_BINS,
                   sample_rate: int = CANONICAL_RATE) -> np.ndarray:
    """Triangular mel filters spanning 0 Hz to Nyquist."""
    edges = _mel_inv(np.linspace(_mel(0.0), _mel(sample_rate / 2), n_filters + 2))
    bin_freqs = np.arange(n_bins) * sample_rate / WINDOW
    bank = np.zeros((n_filters, n_bins))
    for i in range(n_filters):
        lo, mid, hi = edges[i], edges[i + 1], edges[i + 2]
        rising = (bin_freqs - lo) / max(mid - lo, 1e-12)
        falling = (hi - bin_freqs) / max(hi - mid, 1e-12)
        bank[i] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bank


_MEL_BANK = mel_filterbank()


def extract_features(w: Waveform, kind: str) -> FeatureMatrix:
    """Frame a 16 kHz waveform and extract spectral features.

    kind "magnitude_spectrum": 513 one-sided FFT magnitudes per frame.
    kind "mfcc": 13 coefficients (DCT-II of 40 log-mel energies,
    coefficients 1..13, c0 dropped).
    """
    if kind not in (KIND_MAGNITUDE, KIND_MFCC):
        raise ValueError(f"unknown feature kind {kind!r}")
    frames = _frame_signal(w.samples, WINDOW, HOP)
    mag = np.abs(scipy.fft.rfft(frames, axis=1))
    if kind == KIND_MAGNITUDE:
        return FeatureMatrix(mag, float(TOKEN_RATE), kind)
    mel_energy = mag @ _MEL_BANK.T
    log_mel = np.log(mel_energy + LOG_FLOOR)
    cepstra = scipy.fft.dct(log_mel, type=2, norm="ortho", axis=1)
    return FeatureMatrix(cepstra[:, 1:N_MFCC + 1], float(TOKEN_RATE), kind)


def rms_energy(w: Waveform, hop: int = HOP, window: int = WINDOW) -> np.ndarray:
    """Per-frame root-mean-square energy using the standard framing rule."""
    if window < 1:
        raise ValueError("window must be >= 1")
    frames = _frame_signal(w.samples, window, hop)
    return np.sqrt(np.mean(frames ** 2, axis=1))

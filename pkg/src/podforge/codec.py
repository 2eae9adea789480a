"""Trainable 1024-entry vector quantizer over 25 Hz frames plus a
spectral reconstruction decoder.

Quantization runs in MFCC-13 space; each codebook entry also stores the
mean magnitude spectrum of its training frames, which the decoder turns
back into audio with Griffin-Lim phase estimation.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .audio import (CANONICAL_RATE, HOP, KIND_MAGNITUDE, KIND_MFCC, TOKEN_RATE,
                    WINDOW, Waveform, extract_features)
from .errors import InsufficientData, InvalidToken, IoFailure

CODEBOOK_MAGIC = b"PFCODEC\x00"
CODEBOOK_VERSION = 1
GRIFFIN_LIM_ITERS = 32
GRIFFIN_LIM_SEED = 0x5EED


@dataclass
class Codebook:
    """Immutable quantizer: centroids in MFCC space + reconstruction spectra."""

    centroids: np.ndarray       # k x 13
    recon_spectra: np.ndarray   # k x 513, non-negative
    sample_rate: int = CANONICAL_RATE
    token_rate: int = TOKEN_RATE
    version: int = CODEBOOK_VERSION
    objective_history: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        self.centroids = np.ascontiguousarray(self.centroids, dtype=np.float32)
        self.recon_spectra = np.ascontiguousarray(self.recon_spectra, dtype=np.float32)
        if self.centroids.ndim != 2 or self.recon_spectra.ndim != 2:
            raise ValueError("centroids and recon_spectra must be 2-D")
        if self.centroids.shape[0] != self.recon_spectra.shape[0]:
            raise ValueError("centroids/recon_spectra row counts differ")
        if not np.all(np.isfinite(self.centroids)):
            raise ValueError("centroids must be finite")
        if np.any(self.recon_spectra < 0):
            raise ValueError("reconstruction spectra must be non-negative")

    @property
    def size(self) -> int:
        return self.centroids.shape[0]

    def save(self, path) -> None:
        header = CODEBOOK_MAGIC + struct.pack(
            "<6I", self.version, self.size, self.centroids.shape[1],
            self.recon_spectra.shape[1], self.sample_rate, self.token_rate,
        )
        try:
            with open(path, "wb") as fh:
                fh.write(header)
                fh.write(self.centroids.tobytes())
                fh.write(self.recon_spectra.tobytes())
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "Codebook":
        try:
            with open(path, "rb") as fh:
                data = fh.read()
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        if data[:8] != CODEBOOK_MAGIC:
            raise ValueError(f"{path}: not a codebook file")
        version, k, cdim, sdim, rate, token_rate = struct.unpack_from("<6I", data, 8)
        if version != CODEBOOK_VERSION:
            raise ValueError(f"{path}: unsupported codebook version {version}")
        offset = 8 + 24
        cent = np.frombuffer(data, dtype=np.float32, count=k * cdim, offset=offset)
        offset += cent.nbytes
        spec = np.frombuffer(data, dtype=np.float32, count=k * sdim, offset=offset)
        return cls(cent.reshape(k, cdim).copy(), spec.reshape(k, sdim).copy(),
                   sample_rate=rate, token_rate=token_rate, version=version)


def _squared_distances(frames: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = (
        (frames ** 2).sum(axis=1)[:, None]
        + (centers ** 2).sum(axis=1)[None, :]
        - 2.0 * frames @ centers.T
    )
    np.maximum(d2, 0.0, out=d2)
    return d2


def _assign(frames: np.ndarray, centers: np.ndarray):
    d2 = _squared_distances(frames, centers)
    labels = d2.argmin(axis=1)
    return labels, d2[np.arange(len(frames)), labels]


def _kmeans_pp_init(frames: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = np.empty((k, frames.shape[1]), dtype=frames.dtype)
    centers[0] = frames[rng.integers(len(frames))]
    d2 = ((frames - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(len(frames), p=d2 / total)
        else:
            idx = rng.integers(len(frames))
        centers[j] = frames[idx]
        d2 = np.minimum(d2, ((frames - centers[j]) ** 2).sum(axis=1))
    return centers


def train_codebook(corpus: list[Waveform], k: int = 1024, seed: int = 0,
                   max_iters: int = 50, tol: float = 1e-4) -> Codebook:
    """Fit a k-entry codebook by seeded k-means over pooled MFCC frames.

    Lloyd iterations stop when the relative objective change drops below
    tol or after max_iters. Empty clusters are reseeded to the frame
    farthest from its assigned centroid. Reconstruction spectra are the
    mean magnitude spectrum of each entry's assigned frames.
    """
    mfcc_parts, mag_parts = [], []
    for w in corpus:
        mfcc_parts.append(extract_features(w, KIND_MFCC).frames)
        mag_parts.append(extract_features(w, KIND_MAGNITUDE).frames)
    if not mfcc_parts:
        raise InsufficientData("empty training corpus")
    frames = np.concatenate(mfcc_parts).astype(np.float64)
    mags = np.concatenate(mag_parts)
    if len(frames) < k:
        raise InsufficientData(f"{len(frames)} frames pooled, need at least {k}")

    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(frames, k, rng)

    history = []
    prev_obj = None
    labels, dmin = _assign(frames, centers)
    for _ in range(max_iters):
        obj = float(dmin.sum())
        history.append(obj)
        if prev_obj is not None and abs(prev_obj - obj) < tol * max(prev_obj, 1e-30):
            break
        prev_obj = obj
        for j in range(k):
            mask = labels == j
            if mask.any():
                centers[j] = frames[mask].mean(axis=0)
        # reseed empties to the globally farthest frames, one frame each
        empty = np.setdiff1d(np.arange(k), labels, assume_unique=False)
        if len(empty):
            spare = dmin.copy()
            for j in empty:
                far = int(spare.argmax())
                centers[j] = frames[far]
                spare[far] = -np.inf
        labels, dmin = _assign(frames, centers)

    # a reseed in the final update could still leave an empty entry;
    # resolve before computing reconstruction spectra
    for _ in range(10):
        empty = np.setdiff1d(np.arange(k), labels)
        if not len(empty):
            break
        spare = dmin.copy()
        for j in empty:
            far = int(spare.argmax())
            centers[j] = frames[far]
            spare[far] = -np.inf
        labels, dmin = _assign(frames, centers)
    if len(np.setdiff1d(np.arange(k), labels)):
        raise InsufficientData("could not fill every codebook entry")

    recon = np.zeros((k, mags.shape[1]), dtype=np.float64)
    for j in range(k):
        recon[j] = mags[labels == j].mean(axis=0)
    return Codebook(centers, recon, objective_history=history)


def encode(w: Waveform, cb: Codebook) -> np.ndarray:
    """Quantize each 25 Hz MFCC frame to its nearest centroid id."""
    feats = extract_features(w, KIND_MFCC).frames
    labels, _ = _assign(feats, cb.centroids.astype(np.float64))
    return labels.astype(np.int64)


def quantization_error(w: Waveform, cb: Codebook) -> float:
    """Mean squared distance from each frame to its assigned centroid."""
    feats = extract_features(w, KIND_MFCC).frames
    _, dmin = _assign(feats, cb.centroids.astype(np.float64))
    return float(dmin.mean())


def _overlap_add(spectra: np.ndarray) -> np.ndarray:
    frames = scipy.fft.irfft(spectra, n=WINDOW, axis=1)
    n_frames = len(frames)
    out = np.zeros((n_frames - 1) * HOP + WINDOW)
    weight = np.zeros_like(out)
    for t in range(n_frames):
        out[t * HOP:t * HOP + WINDOW] += frames[t]
        weight[t * HOP:t * HOP + WINDOW] += 1.0
    return out / weight


def _stft(samples: np.ndarray, n_frames: int) -> np.ndarray:
    idx = np.arange(WINDOW)[None, :] + HOP * np.arange(n_frames)[:, None]
    return scipy.fft.rfft(samples[idx], axis=1)


def decode(tokens, cb: Codebook) -> Waveform:
    """Reconstruct audio from token ids via Griffin-Lim phase estimation.

    Deterministic: the initial random phase comes from a fixed seed.
    """
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.size == 0:
        return Waveform(np.zeros(0), cb.sample_rate)
    bad = (tokens < 0) | (tokens >= cb.size)
    if bad.any():
        raise InvalidToken(int(tokens[bad][0]))

    target_mag = cb.recon_spectra[tokens].astype(np.float64)
    rng = np.random.default_rng(GRIFFIN_LIM_SEED)
    phase = rng.uniform(-np.pi, np.pi, target_mag.shape)
    spectra = target_mag * np.exp(1j * phase)
    for _ in range(GRIFFIN_LIM_ITERS):
        samples = _overlap_add(spectra)
        phase = np.angle(_stft(samples, len(tokens)))
        spectra = target_mag * np.exp(1j * phase)
    samples = _overlap_add(spectra)

    peak = np.max(np.abs(samples)) if samples.size else 0.0
    if peak > 1.0:
        samples = samples / peak
    return Waveform(samples, cb.sample_rate)

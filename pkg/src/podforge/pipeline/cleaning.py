"""Pluggable cleaning stages and the built-in DSP implementations.

Real deployments slot neural cleaners in here; the built-ins are a
rumble highpass and a spectral-subtraction noise gate. Every stage must
preserve the sample rate and keep duration within one hop of the input.
"""

from __future__ import annotations

import numpy as np
import scipy.fft
import scipy.signal

from ..audio import HOP, WINDOW, Waveform
from ..errors import StageFailure


class CleaningStage:
    """Waveform -> Waveform transform with a stable name."""

    name = "identity"

    def transform(self, w: Waveform) -> Waveform:
        raise NotImplementedError


class HighpassStage(CleaningStage):
    """Removes low-frequency rumble below the cutoff.

    Four cascaded one-pole sections give roughly 22 dB of attenuation one
    octave below an 80 Hz cutoff while leaving speech bands untouched.
    """

    name = "highpass"

    def __init__(self, cutoff_hz: float = 80.0, sections: int = 4):
        self.cutoff_hz = cutoff_hz
        self.sections = sections

    def transform(self, w: Waveform) -> Waveform:
        rc = 1.0 / (2.0 * np.pi * self.cutoff_hz)
        dt = 1.0 / w.sample_rate
        a = rc / (rc + dt)
        out = w.samples
        for _ in range(self.sections):
            out = scipy.signal.lfilter([a, -a], [1.0, -a], out)
        return Waveform(np.clip(out, -1.0, 1.0), w.sample_rate)


class SpectralGateStage(CleaningStage):
    """Suppresses stationary noise by magnitude spectral subtraction.

    The per-bin noise floor is the median magnitude over non-overlapping
    frames; floor_multiplier times that floor is subtracted from every
    frame's magnitude (clipped at zero), phases kept.
    """

    name = "spectral_gate"

    def __init__(self, floor_multiplier: float = 2.0, frame: int = WINDOW):
        self.floor_multiplier = floor_multiplier
        self.frame = frame

    def transform(self, w: Waveform) -> Waveform:
        n = len(w.samples)
        if n == 0:
            return Waveform(w.samples.copy(), w.sample_rate)
        n_frames = -(-n // self.frame)
        padded = np.zeros(n_frames * self.frame)
        padded[:n] = w.samples
        spectra = scipy.fft.rfft(padded.reshape(n_frames, self.frame), axis=1)
        mag = np.abs(spectra)
        floor = np.median(mag, axis=0, keepdims=True)
        kept = np.maximum(mag - self.floor_multiplier * floor, 0.0)
        scale = np.where(mag > 0, kept / np.maximum(mag, 1e-30), 0.0)
        cleaned = scipy.fft.irfft(spectra * scale, n=self.frame, axis=1).ravel()[:n]
        return Waveform(np.clip(cleaned, -1.0, 1.0), w.sample_rate)


DEFAULT_STAGES = (HighpassStage(), SpectralGateStage())


def apply_cleaning(w: Waveform, stages) -> Waveform:
    """Run stages in order; failures carry the offending stage's name."""
    out = w
    for stage in stages:
        try:
            candidate = stage.transform(out)
        except Exception as exc:
            raise StageFailure(stage.name, str(exc)) from exc
        if candidate.sample_rate != out.sample_rate:
            raise StageFailure(stage.name, "stage changed the sample rate")
        if abs(len(candidate) - len(out)) > HOP:
            raise StageFailure(stage.name, "stage changed duration by more than one hop")
        out = candidate
    return out

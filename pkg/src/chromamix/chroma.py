"""Chromagrams and time-averaged chroma vectors.

Power spectra are folded onto the twelve pitch classes by hard assignment of
each FFT bin to its nearest MIDI note. Bins below 32 Hz are discarded.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import spectral
from .audio_io import SAMPLE_RATE
from .errors import EmptyInputError

PITCH_CLASSES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")
LOW_CUTOFF_HZ = 32.0


@dataclass(frozen=True, eq=False)
class Chromagram:
    energy: np.ndarray  # (12, frames)
    frame_times: np.ndarray


@dataclass(frozen=True, eq=False)
class ChromaVector:
    values: np.ndarray  # (12,)

    @property
    def argmax(self) -> int:
        return int(np.argmax(self.values))

    def to_dict(self) -> dict:
        return {
            "values": [float(v) for v in self.values],
            "pitch_classes": list(PITCH_CLASSES),
            "argmax": self.argmax,
        }


def pitch_class_of(freq_hz) -> np.ndarray:
    """Pitch class (MIDI note mod 12) of the nearest equal-tempered note."""
    midi = 69.0 + 12.0 * np.log2(np.asarray(freq_hz, dtype=np.float64) / 440.0)
    return np.mod(np.rint(midi).astype(np.int64), 12)


@lru_cache(maxsize=4)
def filterbank(dft_size: int = spectral.DFT_SIZE, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Binary (12, dft_size // 2 + 1) matrix mapping FFT bins to pitch classes."""
    freqs = spectral.bin_frequencies(dft_size, sample_rate)
    fb = np.zeros((12, freqs.size))
    keep = freqs >= LOW_CUTOFF_HZ
    fb[pitch_class_of(freqs[keep]), np.flatnonzero(keep)] = 1.0
    fb.setflags(write=False)
    return fb


def chromagram(segment) -> Chromagram:
    spec = spectral.stft(segment)
    power = spectral.magnitude(spec) ** 2
    energy = filterbank(spec.dft_size, spec.sample_rate) @ power.T
    return Chromagram(energy, spec.frame_times)


def chroma_vector(cgram: Chromagram) -> ChromaVector:
    if cgram.energy.ndim != 2 or cgram.energy.shape[1] == 0:
        raise EmptyInputError("chromagram has no frames")
    return ChromaVector(cgram.energy.mean(axis=1))


def segment_chroma(segment) -> ChromaVector:
    return chroma_vector(chromagram(segment))


def write_csv(cgram: Chromagram, path) -> None:
    """One row per frame: time followed by the twelve class energies."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", *PITCH_CLASSES])
        for t, col in zip(cgram.frame_times, cgram.energy.T):
            writer.writerow([f"{t:.6f}", *(repr(float(v)) for v in col)])

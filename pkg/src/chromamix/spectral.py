"""STFT analysis and overlap-add synthesis at fixed frame parameters.

Frames are centered (reflect-padded by ``dft_size // 2``) and Hann-windowed;
the forward transform is unnormalized and synthesis divides by the summed
squared window.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .audio_io import SAMPLE_RATE, AudioSegment
from .errors import EmptyInputError, ParameterError

DFT_SIZE = 1024
HOP = 256

_WSUM_FLOOR = 1e-10


@lru_cache(maxsize=8)
def hann(n: int) -> np.ndarray:
    """Periodic Hann window (COLA at 75% overlap)."""
    w = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)
    w.setflags(write=False)
    return w


@dataclass(frozen=True, eq=False)
class Spectrogram:
    bins: np.ndarray  # (frames, dft_size // 2 + 1), complex
    dft_size: int = DFT_SIZE
    hop: int = HOP
    sample_rate: int = SAMPLE_RATE

    @property
    def n_frames(self) -> int:
        return self.bins.shape[0]

    @property
    def frame_times(self) -> np.ndarray:
        return np.arange(self.n_frames) * self.hop / self.sample_rate


def n_frames(length: int, dft_size: int = DFT_SIZE, hop: int = HOP) -> int:
    padded = length + 2 * (dft_size // 2)
    return 1 + (padded - dft_size) // hop


def _samples(x) -> tuple[np.ndarray, int]:
    if isinstance(x, AudioSegment):
        return np.asarray(x.samples, dtype=np.float64), x.sample_rate
    return np.asarray(x, dtype=np.float64), SAMPLE_RATE


def stft(segment, dft_size: int = DFT_SIZE, hop: int = HOP) -> Spectrogram:
    """Complex STFT of an ``AudioSegment`` (or bare sample array)."""
    x, sr = _samples(segment)
    if x.size == 0:
        raise EmptyInputError("stft of empty input")
    pad = dft_size // 2
    mode = "reflect" if x.size > 1 else "constant"
    xp = np.pad(x, pad, mode=mode)
    frames = np.lib.stride_tricks.sliding_window_view(xp, dft_size)[::hop]
    bins = np.fft.rfft(frames * hann(dft_size), axis=-1)
    return Spectrogram(bins, dft_size, hop, sr)


def istft(spec: Spectrogram, length: int, **provenance) -> AudioSegment:
    """Invert :func:`stft` by windowed overlap-add, trimmed to ``length``.

    Extra keyword arguments (``song_id``, ``stem``, ``offset_s``) are passed
    to the returned segment.
    """
    n_fft, hop = spec.dft_size, spec.hop
    if spec.bins.ndim != 2 or spec.bins.shape[1] != n_fft // 2 + 1:
        raise ParameterError(
            f"bins shape {spec.bins.shape} inconsistent with dft_size {n_fft}"
        )
    if length < 0 or n_frames(length, n_fft, hop) > spec.n_frames:
        raise ParameterError(f"length {length} needs more than {spec.n_frames} frames")
    w = hann(n_fft)
    frames = np.fft.irfft(spec.bins, n=n_fft, axis=-1) * w
    total = n_fft + hop * (spec.n_frames - 1)
    y = np.zeros(total)
    wsum = np.zeros(total)
    w2 = w * w
    for i, frame in enumerate(frames):
        s = i * hop
        y[s : s + n_fft] += frame
        wsum[s : s + n_fft] += w2
    nz = wsum > _WSUM_FLOOR
    y[nz] /= wsum[nz]
    pad = n_fft // 2
    return AudioSegment(y[pad : pad + length], spec.sample_rate, **provenance)


def magnitude(spec) -> np.ndarray:
    bins = spec.bins if isinstance(spec, Spectrogram) else np.asarray(spec)
    return np.abs(bins)


def bin_frequencies(dft_size: int = DFT_SIZE, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    return np.arange(dft_size // 2 + 1) * sample_rate / dft_size

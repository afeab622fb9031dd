"""WAV ingestion, resampling and slicing.

Everything downstream works on 16 kHz mono ``AudioSegment`` objects.
"""
from __future__ import annotations

import enum
import os
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np
import scipy.io.wavfile
import scipy.signal

from .errors import BoundsError, EmptyInputError, FormatError

SAMPLE_RATE = 16000

# Kaiser beta 10 puts the anti-aliasing filter's stopband near -100 dB.
_RESAMPLE_WINDOW = ("kaiser", 10.0)


class Stem(str, enum.Enum):
    VOCAL = "vocal"
    ACCOMPANIMENT = "accompaniment"
    MIXTURE = "mixture"


@dataclass(frozen=True, eq=False)
class AudioSegment:
    """A mono waveform slice plus where it came from."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE
    song_id: str = ""
    stem: Stem = Stem.MIXTURE
    offset_s: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples))
        object.__setattr__(self, "stem", Stem(self.stem))
        if self.samples.ndim != 1:
            raise FormatError(f"expected mono samples, got shape {self.samples.shape}")

    def __len__(self):
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate

    def with_samples(self, samples, **changes) -> "AudioSegment":
        return replace(self, samples=samples, **changes)


def _to_float(data: np.ndarray) -> np.ndarray:
    if data.dtype == np.uint8:
        return (data.astype(np.float32) - 128.0) / 128.0
    if data.dtype == np.int16:
        return data.astype(np.float32) / 32768.0
    if data.dtype == np.int32:
        # scipy left-justifies 24-bit PCM into int32, so one scale covers both
        return (data.astype(np.float64) / 2.0**31).astype(np.float32)
    if data.dtype in (np.float32, np.float64):
        return data
    raise FormatError(f"unsupported WAV sample format: {data.dtype}")


def resample(samples: np.ndarray, orig_rate: int, target_rate: int) -> np.ndarray:
    """Windowed-sinc polyphase resampling to ``target_rate``.

    Output length is ``round(len(samples) * target_rate / orig_rate)``.
    """
    if orig_rate == target_rate:
        return samples
    ratio = Fraction(int(target_rate), int(orig_rate))
    out = scipy.signal.resample_poly(
        samples, ratio.numerator, ratio.denominator, window=_RESAMPLE_WINDOW
    )
    n_out = int(round(len(samples) * target_rate / orig_rate))
    if len(out) >= n_out:
        out = out[:n_out]
    else:
        out = np.pad(out, (0, n_out - len(out)))
    return out.astype(samples.dtype, copy=False)


def load_wav(
    path,
    target_rate: int = SAMPLE_RATE,
    song_id: str | None = None,
    stem: Stem | str = Stem.MIXTURE,
) -> AudioSegment:
    """Read a PCM or float WAV as a mono segment at ``target_rate``.

    Multi-channel input is averaged to mono; integer PCM is scaled to
    [-1, 1). Float data is passed through untouched.
    """
    try:
        rate, data = scipy.io.wavfile.read(os.fspath(path))
    except (FileNotFoundError, PermissionError, IsADirectoryError):
        raise
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    data = _to_float(data)
    if data.ndim == 2:
        data = data.mean(axis=1, dtype=np.float64).astype(data.dtype)
    if data.size == 0:
        raise EmptyInputError(f"{path}: zero-length audio")
    data = resample(data, rate, target_rate)
    if song_id is None:
        song_id = os.path.splitext(os.path.basename(os.fspath(path)))[0]
    return AudioSegment(data, target_rate, song_id, Stem(stem), 0.0)


def save_wav(segment: AudioSegment, path) -> None:
    """Write ``segment`` as 32-bit float WAV. Values beyond +-1 are kept."""
    if len(segment.samples) == 0:
        raise EmptyInputError("cannot write an empty segment")
    scipy.io.wavfile.write(
        os.fspath(path), segment.sample_rate, segment.samples.astype(np.float32)
    )


def wav_info(path) -> tuple[int, int]:
    """Return ``(sample_rate, n_frames)`` without decoding the whole file."""
    import wave

    try:
        with wave.open(os.fspath(path), "rb") as wf:
            return wf.getframerate(), wf.getnframes()
    except wave.Error:
        # the stdlib reader rejects IEEE float WAVs; fall back to mmap read
        rate, data = scipy.io.wavfile.read(os.fspath(path), mmap=True)
        return rate, data.shape[0]


def slice(segment: AudioSegment, start_s: float, duration_s: float) -> AudioSegment:
    """Cut ``duration_s`` seconds starting ``start_s`` seconds into ``segment``."""
    sr = segment.sample_rate
    start = int(round(start_s * sr))
    n = int(round(duration_s * sr))
    if start_s < 0 or duration_s < 0 or start + n > len(segment.samples):
        raise BoundsError(
            f"window [{start_s}, {start_s + duration_s}) s outside "
            f"{segment.duration_s:.6f} s segment"
        )
    return segment.with_samples(
        segment.samples[start : start + n], offset_s=segment.offset_s + start_s
    )


def slice_samples(segment: AudioSegment, start: int, n: int) -> AudioSegment:
    """Sample-indexed variant of :func:`slice`."""
    if start < 0 or n < 0 or start + n > len(segment.samples):
        raise BoundsError(f"samples [{start}, {start + n}) outside {len(segment)}")
    return segment.with_samples(
        segment.samples[start : start + n],
        offset_s=segment.offset_s + start / segment.sample_rate,
    )

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chromamix import spectral
from chromamix.errors import EmptyInputError, ParameterError

from conftest import seg, sine


def test_ten_seconds_gives_626_frames():
    spec = spectral.stft(np.zeros(160000))
    assert spec.bins.shape == (626, 513)
    assert spectral.n_frames(160000) == 626
    assert not np.any(spec.bins)


def test_impulse_magnitude_is_window_value():
    x = np.zeros(160000)
    x[80000] = 1.0
    spec = spectral.stft(x)
    frame = 312
    pos = 80000 - (frame * 256 - 512)
    expected = 0.5 - 0.5 * math.cos(2 * math.pi * pos / 1024)
    np.testing.assert_allclose(np.abs(spec.bins[frame]), expected, rtol=1e-12)


def test_sine_peak_bin():
    spec = spectral.stft(sine(1000, 1.0))
    mags = spectral.magnitude(spec)[5:-5]
    assert np.all(np.argmax(mags, axis=1) == round(1000 * 1024 / 16000))


def test_empty_raises():
    with pytest.raises(EmptyInputError):
        spectral.stft(np.zeros(0))


def test_magnitude():
    assert spectral.magnitude(np.array([[3 + 4j]]))[0, 0] == 5.0
    z = np.random.default_rng(0).normal(size=(4, 513)) * (1 + 1j)
    np.testing.assert_allclose(spectral.magnitude(z * np.exp(1j * 0.7)), np.abs(z))


def test_white_noise_roundtrip():
    x = np.random.default_rng(1).normal(size=48000)
    y = spectral.istft(spectral.stft(x), len(x)).samples
    assert np.max(np.abs(y - x)) < 1e-6


def test_sine_roundtrip_relative_l2():
    x = sine(440, 2.0)
    y = spectral.istft(spectral.stft(x), len(x)).samples
    assert np.linalg.norm(y - x) / np.linalg.norm(x) < 1e-6


def test_zero_spectrogram_inverts_to_zero():
    spec = spectral.Spectrogram(np.zeros((40, 513), dtype=complex))
    assert not np.any(spectral.istft(spec, 9000).samples)


def test_istft_rejects_bad_parameters():
    with pytest.raises(ParameterError):
        spectral.istft(spectral.Spectrogram(np.zeros((4, 100), dtype=complex)), 512)
    with pytest.raises(ParameterError):
        spectral.istft(spectral.stft(np.zeros(1000)), 100000)


def test_istft_keeps_provenance():
    y = spectral.istft(spectral.stft(seg(np.ones(2000))), 2000, song_id="s", offset_s=1.5)
    assert y.song_id == "s" and y.offset_s == 1.5


@settings(max_examples=30, deadline=None)
@given(st.integers(600, 40000), st.integers(0, 2**32 - 1))
def test_perfect_reconstruction_property(n, seed):
    x = np.random.default_rng(seed).uniform(-1, 1, n)
    y = spectral.istft(spectral.stft(x), n).samples
    assert np.max(np.abs(y - x)) < 1e-6


def test_parseval():
    x = np.random.default_rng(2).normal(size=20000)
    spec = spectral.stft(x)
    w = spectral.hann(1024)
    xp = np.pad(x, 512, mode="reflect")
    frames = np.lib.stride_tricks.sliding_window_view(xp, 1024)[::256]
    windowed_energy = np.sum((frames * w) ** 2)
    p = np.abs(spec.bins) ** 2
    one_sided = p[:, 0].sum() + p[:, -1].sum() + 2 * p[:, 1:-1].sum()
    assert one_sided / 1024 == pytest.approx(windowed_energy, rel=1e-4)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
def test_linearity(a, b, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(2, 4000))
    lhs = spectral.stft(a * x + b * y).bins
    rhs = a * spectral.stft(x).bins + b * spectral.stft(y).bins
    assert np.max(np.abs(lhs - rhs)) < 1e-9

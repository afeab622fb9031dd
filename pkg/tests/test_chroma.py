import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chromamix import chroma, spectral
from chromamix.errors import EmptyInputError

from conftest import sine


def midi_hz(m):
    return 440.0 * 2 ** ((m - 69) / 12)


def test_silence_is_zero():
    cg = chroma.chromagram(np.zeros(16000))
    assert cg.energy.shape[0] == 12
    assert not np.any(cg.energy)
    assert not np.any(chroma.chroma_vector(cg).values)


def test_a440_every_voiced_frame():
    cg = chroma.chromagram(sine(440, 10.0))
    # the first/last two frames reach into the reflect padding
    interior = np.argmax(cg.energy, axis=0)[2:-2]
    assert np.all(interior == 9)
    assert chroma.chroma_vector(cg).argmax == 9


def test_octave_folding_c4_c5():
    x = sine(261.63, 10.0) + sine(523.25, 10.0)
    assert chroma.segment_chroma(x).argmax == 0


@pytest.mark.parametrize("note", [57, 60, 64, 67, 71])
def test_octave_invariance(note):
    lo = chroma.segment_chroma(sine(midi_hz(note), 2.0)).argmax
    hi = chroma.segment_chroma(sine(midi_hz(note + 12), 2.0)).argmax
    assert lo == hi == note % 12


@settings(max_examples=15, deadline=None)
@given(st.floats(0.01, 10), st.integers(0, 1000))
def test_scale_equivariance(a, seed):
    x = np.random.default_rng(seed).normal(size=8000)
    np.testing.assert_allclose(
        chroma.chromagram(a * x).energy, a**2 * chroma.chromagram(x).energy, rtol=1e-9, atol=0
    )


def test_filterbank_partition():
    fb = chroma.filterbank()
    freqs = spectral.bin_frequencies()
    assert fb.shape == (12, 513)
    col = fb.sum(axis=0)
    np.testing.assert_array_equal(col[freqs >= 32.0], 1.0)
    np.testing.assert_array_equal(col[freqs < 32.0], 0.0)


def test_energy_conservation():
    x = np.random.default_rng(3).normal(size=16000)
    power = spectral.magnitude(spectral.stft(x)) ** 2
    kept = power[:, spectral.bin_frequencies() >= 32.0].sum()
    assert chroma.chromagram(x).energy.sum() == pytest.approx(kept, rel=1e-9)


def test_nearest_note_assignment():
    assert chroma.pitch_class_of(440.0) == 9
    assert chroma.pitch_class_of(261.63) == 0
    # 453.125 Hz is just over half a semitone above A4
    assert chroma.pitch_class_of(453.125) == 10


class TestChromaVector:
    def test_constant_chromagram(self):
        col = np.arange(12, dtype=float)
        cg = chroma.Chromagram(np.tile(col[:, None], (1, 5)), np.arange(5))
        np.testing.assert_allclose(chroma.chroma_vector(cg).values, col)

    def test_two_frame_mean(self):
        e = np.zeros((12, 2))
        e[9, 0] = 1.0
        v = chroma.chroma_vector(chroma.Chromagram(e, np.arange(2))).values
        expected = np.zeros(12)
        expected[9] = 0.5
        np.testing.assert_array_equal(v, expected)

    def test_zero_frames(self):
        with pytest.raises(EmptyInputError):
            chroma.chroma_vector(chroma.Chromagram(np.zeros((12, 0)), np.zeros(0)))


def test_csv_export(tmp_path):
    cg = chroma.chromagram(sine(440, 0.5))
    path = tmp_path / "c.csv"
    chroma.write_csv(cg, path)
    rows = path.read_text().strip().splitlines()
    assert rows[0].split(",") == ["time_s", *chroma.PITCH_CLASSES]
    assert len(rows) == cg.energy.shape[1] + 1

import numpy as np
import pytest

from shotsense.errors import LengthMismatchError, RangeOutOfBoundsError
from shotsense.services.spectral import (
    dft,
    dft_frames,
    energy_freq,
    energy_time,
    magnitudes,
    spectral_stats,
)

SIZES = (1, 2, 4, 99, 128)


def naive_dft(x):
    n = len(x)
    out = np.zeros(n, dtype=np.complex128)
    for k in range(n):
        out[k] = np.sum(x * np.exp(-2j * np.pi * np.arange(n) * k / n))
    return out


def test_dft_matches_naive_sum(rng):
    for i in range(200):
        n = SIZES[i % len(SIZES)]
        x = rng.uniform(-1.0, 1.0, n)
        ref = naive_dft(x)
        for method in ("direct", "fft"):
            got = dft(x, n, method=method).bins
            assert np.max(np.abs(got - ref)) < 1e-9


def test_conjugate_symmetry(rng):
    for n in SIZES:
        x = rng.standard_normal(n)
        bins = dft(x, n).bins
        for k in range(1, n):
            assert abs(bins[n - k] - np.conj(bins[k])) < 1e-9


def test_parseval(rng):
    for i in range(200):
        n = SIZES[i % len(SIZES)]
        x = rng.standard_normal(n)
        et = energy_time(x)
        ef = energy_freq(dft(x, n))
        assert ef == pytest.approx(et, rel=1e-9)


def test_variance_matches_two_pass(rng):
    for _ in range(200):
        mags = rng.uniform(0.0, 3.0, 99)
        stats = spectral_stats(mags, 30, 49)
        band = mags[30:50]
        mean = band.sum() / 20
        var = np.sum((band - mean) ** 2) / 20
        assert abs(stats.mean - mean) < 1e-12
        assert abs(stats.variance - var) < 1e-12
        assert stats.n_bins == 20


def test_constant_band_has_zero_variance():
    stats = spectral_stats(np.full(99, 0.7), 30, 49)
    assert stats.variance == 0.0
    assert stats.mean == pytest.approx(0.7)


def test_batched_frames_match_single_frames(rng):
    frames = rng.standard_normal((7, 99))
    batch = dft_frames(frames)
    for row, frame in zip(batch, frames):
        assert np.max(np.abs(row - dft(frame, 99).bins)) < 1e-9
    assert magnitudes(dft(frames[0], 99)).shape == (99,)


def test_errors():
    with pytest.raises(LengthMismatchError):
        dft(np.zeros(98), 99)
    with pytest.raises(RangeOutOfBoundsError):
        spectral_stats(np.zeros(99), 30, 99)
    with pytest.raises(RangeOutOfBoundsError):
        spectral_stats(np.zeros(99), 40, 30)


@pytest.mark.parametrize("method", ["direct", "fft"])
def test_dft_is_linear(rng, method):
    f, g = rng.standard_normal((2, 99))
    a, b = 0.7, -2.5
    combined = dft(a * f + b * g, 99, method).bins
    separate = a * dft(f, 99, method).bins + b * dft(g, 99, method).bins
    assert np.max(np.abs(combined - separate)) < 1e-9

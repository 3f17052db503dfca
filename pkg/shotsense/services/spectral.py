# shotsense/services/spectral.py
"""
Arbitrary-length DFT and the energy / variance quantities built on it.

The direct O(N^2) sum is the reference path. The "fft" path (numpy's pocketfft,
which handles any N including 99) is what the detector uses on batches of
windows; tests pin it to the direct sum within 1e-9 per bin.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Literal, Sequence

import numpy as np

from shotsense.errors import LengthMismatchError, RangeOutOfBoundsError
from shotsense.models import ComplexSpectrum, SpectralStats

DftMethod = Literal["direct", "fft"]


@lru_cache(maxsize=16)
def dft_matrix(n_points: int) -> np.ndarray:
    """W[k, n] = exp(-j 2 pi n k / N), with n*k reduced mod N before scaling."""
    n = np.arange(n_points)
    nk = np.outer(n, n) % n_points
    w = np.exp(-2j * np.pi * nk / n_points)
    w.setflags(write=False)
    return w


def dft(frame: Sequence[float] | np.ndarray, n_points: int, method: DftMethod = "direct") -> ComplexSpectrum:
    x = np.asarray(frame, dtype=np.float64).reshape(-1)
    if n_points < 1 or x.size != n_points:
        raise LengthMismatchError(f"frame has {x.size} samples, expected n_points={n_points}")
    if method == "fft":
        bins = np.fft.fft(x)
    else:
        bins = dft_matrix(n_points) @ x
    return ComplexSpectrum(bins=bins, n_points=n_points)


def dft_frames(frames: np.ndarray) -> np.ndarray:
    """
    Row-wise transform of a (n_windows, N) array. Each row is transformed
    independently, so the result for a row never depends on the batch it came in.
    """
    return np.fft.fft(np.asarray(frames, dtype=np.float64), axis=-1)


def magnitudes(spectrum: ComplexSpectrum) -> np.ndarray:
    return np.abs(spectrum.bins)


def energy_time(frame: Sequence[float] | np.ndarray) -> float:
    x = np.asarray(frame, dtype=np.float64)
    return float(np.sum(x * x))


def energy_freq(spectrum: ComplexSpectrum) -> float:
    mags = np.abs(spectrum.bins)
    return float(np.sum(mags * mags) / spectrum.n_points)


def _check_range(length: int, bin_lo: int, bin_hi: int) -> None:
    if not 0 <= bin_lo <= bin_hi < length:
        raise RangeOutOfBoundsError(f"bin range [{bin_lo}, {bin_hi}] outside [0, {length - 1}]")


def band_stats(mags: np.ndarray, bin_lo: int, bin_hi: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Mean and population variance of mags[..., bin_lo:bin_hi+1] along the last axis,
    variance as E[X^2] - E[X]^2 clamped at zero.
    """
    mags = np.asarray(mags, dtype=np.float64)
    _check_range(mags.shape[-1], bin_lo, bin_hi)
    band = mags[..., bin_lo:bin_hi + 1]
    mean = band.mean(axis=-1)
    var = np.maximum((band * band).mean(axis=-1) - mean * mean, 0.0)
    return mean, var


def spectral_stats(mags: Sequence[float] | np.ndarray, bin_lo: int, bin_hi: int) -> SpectralStats:
    mean, var = band_stats(np.asarray(mags, dtype=np.float64), bin_lo, bin_hi)
    return SpectralStats(mean=float(mean), variance=float(var), bin_lo=bin_lo, bin_hi=bin_hi)

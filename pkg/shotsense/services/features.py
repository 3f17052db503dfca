# shotsense/services/features.py
"""Recognition features: the detector's high-band slice and single-frame MFCCs."""
from __future__ import annotations

import csv
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import librosa
import numpy as np
from scipy.fft import dct

from shotsense.errors import DimensionMismatchError, IoFailureError, MalformedHeaderError
from shotsense.models import AudioBuffer, FeatureKind, FeatureVector, MfccConfig
from shotsense.utils import read_manifest_file


class HasHfSlice(Protocol):
    hf_slice: tuple[float, ...]


def hf_amplitude(event: HasHfSlice, label: str | None = None) -> FeatureVector:
    """The |X_l[k]| slice exactly as the detector emitted it."""
    return FeatureVector(values=tuple(event.hf_slice), kind="hf_amplitude", label=label)


# ---------------------------------------------------------------------
# MFCC
# ---------------------------------------------------------------------
@lru_cache(maxsize=8)
def _filterbank(n_filters: int, fft_len: int, rate_hz: int, f_min: float, f_max: float) -> np.ndarray:
    fb = librosa.filters.mel(
        sr=rate_hz, n_fft=fft_len, n_mels=n_filters, fmin=f_min, fmax=f_max,
        htk=True, norm=None, dtype=np.float64,
    )
    fb.setflags(write=False)
    return fb


def mel_filterbank(config: MfccConfig, rate_hz: int) -> np.ndarray:
    """Triangular mel filters (HTK mel scale, unit peak), shape (n_filters, fft_len // 2 + 1)."""
    f_max = config.f_max_hz if config.f_max_hz is not None else rate_hz / 2
    return _filterbank(config.n_filters, config.fft_len, rate_hz, float(config.f_min_hz), float(f_max))


def extract_context(samples: np.ndarray, center_sample: int, length: int) -> np.ndarray:
    """length samples centered on center_sample, zero-padded past either edge."""
    start = center_sample - length // 2
    out = np.zeros(length, dtype=np.float64)
    lo, hi = max(start, 0), min(start + length, samples.size)
    if hi > lo:
        out[lo - start:hi - start] = samples[lo:hi]
    return out


def log_mel_energies(context: np.ndarray, config: MfccConfig, rate_hz: int) -> np.ndarray:
    x = np.asarray(context, dtype=np.float64)
    emphasized = np.append(x[:1], x[1:] - config.pre_emphasis * x[:-1])
    windowed = emphasized * np.hamming(x.size)
    power = np.abs(np.fft.rfft(windowed, n=config.fft_len)) ** 2 / config.fft_len
    energies = mel_filterbank(config, rate_hz) @ power
    return np.log(np.maximum(energies, config.log_floor))


def mfcc(audio: AudioBuffer, center_sample: int, config: MfccConfig | None = None,
         label: str | None = None) -> FeatureVector:
    """
    Single-frame MFCC around center_sample: pre-emphasis, Hamming window,
    power spectrum, mel filterbank, floored log, orthonormal DCT-II.
    """
    config = config or MfccConfig()
    context = extract_context(audio.samples, center_sample, config.context_len)
    log_e = log_mel_energies(context, config, audio.sample_rate_hz)
    coeffs = dct(log_e, type=2, norm="ortho")[: config.n_coeffs]
    return FeatureVector(values=tuple(coeffs.tolist()), kind="mfcc", label=label)


# ---------------------------------------------------------------------
# CSV export / import
# ---------------------------------------------------------------------
def export_features(vectors: Sequence[FeatureVector], path: str | Path, *, dim: int | None = None) -> Path:
    """
    CSV with header f0..f{n-1},label in input order. An empty sequence gives a
    header-only file (with dim columns when dim is given).
    """
    path = Path(path).expanduser()
    n = len(vectors[0]) if vectors else (dim or 0)
    for v in vectors:
        if len(v) != n:
            raise DimensionMismatchError(f"cannot mix {n}- and {len(v)}-value vectors in one CSV")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow([f"f{i}" for i in range(n)] + ["label"])
            for v in vectors:
                w.writerow([repr(x) for x in v.values] + [v.label or ""])
    except OSError as e:
        raise IoFailureError(f"cannot write {path}: {e}") from e
    return path


def _infer_kind(n: int) -> FeatureKind:
    return "hf_amplitude" if n == 20 else "mfcc"


def _recorded_kind(path: Path) -> FeatureKind | None:
    """Kind written by `shot features` into the CSV's manifest sidecar, if any."""
    manifest = read_manifest_file(path)
    extra = manifest.extra if manifest is not None else None
    kind = extra.get("kind") if isinstance(extra, dict) else None
    return kind if kind in ("hf_amplitude", "mfcc") else None


def import_features(path: str | Path, kind: FeatureKind | None = None) -> list[FeatureVector]:
    path = Path(path).expanduser()
    try:
        with open(path, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise IoFailureError(f"cannot read {path}: {e}") from e
    if not rows or not rows[0] or rows[0][-1] != "label":
        raise MalformedHeaderError(f"{path.name}: expected header f0..fN,label")
    header = rows[0]
    n = len(header) - 1
    if header[:-1] != [f"f{i}" for i in range(n)]:
        raise MalformedHeaderError(f"{path.name}: feature columns must be f0..f{n - 1}")
    # the column count alone cannot tell a 20-coefficient MFCC from the hf slice
    kind = kind or _recorded_kind(path) or _infer_kind(n)
    out: list[FeatureVector] = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != n + 1:
            raise MalformedHeaderError(f"{path.name}:{lineno}: {len(row)} columns, expected {n + 1}")
        try:
            values = tuple(float(x) for x in row[:-1])
        except ValueError as e:
            raise MalformedHeaderError(f"{path.name}:{lineno}: {e}") from e
        out.append(FeatureVector(values=values, kind=kind, label=row[-1] or None))
    return out


def feature_vectors(
    audio: AudioBuffer,
    events: Iterable[HasHfSlice],
    kind: FeatureKind,
    *,
    label: str | None = None,
    mfcc_config: MfccConfig | None = None,
    window_len: int = 99,
) -> list[FeatureVector]:
    """Feature vectors for detector events (or analysed windows) of one recording."""
    out: list[FeatureVector] = []
    for e in events:
        if kind == "hf_amplitude":
            out.append(hf_amplitude(e, label=label))
        else:
            start = int(getattr(e, "start_sample"))
            out.append(mfcc(audio, start + window_len // 2, mfcc_config, label=label))
    return out

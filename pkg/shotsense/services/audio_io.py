# shotsense/services/audio_io.py
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import soundfile as sf

from shotsense.errors import (
    AmplitudeOutOfRangeError,
    IoFailureError,
    MalformedHeaderError,
    UnsupportedFormatError,
)
from shotsense.models import AudioBuffer

log = logging.getLogger(__name__)

PCM16_SCALE = 32768.0
_WAV_FORMATS = {"WAV", "WAVEX"}
_SUBTYPES = {"PCM_16": "int16", "FLOAT": "float64"}


def load_wav(path: str | Path) -> AudioBuffer:
    """
    Read a mono RIFF/WAVE file (16-bit PCM or 32-bit float).
    16-bit samples are divided by 32768 so the result lies in [-1, 1).
    """
    path = Path(path).expanduser()
    if not path.is_file():
        raise IoFailureError(f"Audio file not found: {path}")
    try:
        info = sf.info(str(path))
    except RuntimeError as e:
        raise MalformedHeaderError(f"{path.name}: unreadable WAV header ({e})") from e

    if info.format not in _WAV_FORMATS:
        raise UnsupportedFormatError(f"{path.name}: container {info.format} is not RIFF/WAVE")
    if info.channels != 1:
        raise UnsupportedFormatError(f"{path.name}: {info.channels} channels, only mono is supported")
    dtype = _SUBTYPES.get(info.subtype)
    if dtype is None:
        raise UnsupportedFormatError(
            f"{path.name}: sample format {info.subtype} not supported (PCM_16 or FLOAT only)"
        )

    try:
        data, rate = sf.read(str(path), dtype=dtype, always_2d=False)
    except RuntimeError as e:
        raise MalformedHeaderError(f"{path.name}: {e}") from e
    except OSError as e:
        raise IoFailureError(f"{path.name}: {e}") from e

    if data.size == 0:
        raise MalformedHeaderError(f"{path.name}: file contains no samples")
    samples = data.astype(np.float64) / PCM16_SCALE if dtype == "int16" else data.astype(np.float64)
    return AudioBuffer(samples=samples, sample_rate_hz=int(rate))


def quantize_pcm16(samples: np.ndarray) -> np.ndarray:
    """Map [-1, 1] to int16; +1.0 clamps to 32767, -1.0 is -32768."""
    q = np.round(np.asarray(samples, dtype=np.float64) * PCM16_SCALE)
    return np.clip(q, -PCM16_SCALE, PCM16_SCALE - 1).astype(np.int16)


def save_wav(buffer: AudioBuffer, path: str | Path, *, clip: bool = False) -> Path:
    """
    Write a 16-bit PCM mono WAV. Samples must satisfy |x| <= 1 unless clip=True,
    in which case out-of-range samples are clamped and a warning is logged.
    """
    path = Path(path).expanduser()
    samples = buffer.samples
    over = int(np.count_nonzero(np.abs(samples) > 1.0))
    if over:
        if not clip:
            raise AmplitudeOutOfRangeError(
                f"{over} sample(s) exceed |1.0| (peak {buffer.peak:.4f}); normalize first or save with clip=True"
            )
        log.warning("clipping %d sample(s) while writing %s (peak %.4f)", over, path.name, buffer.peak)
        samples = np.clip(samples, -1.0, 1.0)

    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        sf.write(str(path), quantize_pcm16(samples), buffer.sample_rate_hz, subtype="PCM_16", format="WAV")
    except (OSError, RuntimeError) as e:
        raise IoFailureError(f"cannot write {path}: {e}") from e
    return path


def peak_normalize(samples: np.ndarray) -> np.ndarray:
    """Divide by max |x|; an all-zero array is returned as is."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        return samples
    peak = float(np.max(np.abs(samples)))
    if peak == 0.0:
        return samples
    return samples / peak


def normalize_peak(buffer: AudioBuffer) -> AudioBuffer:
    """Scale so the peak magnitude is exactly 1; silence passes through unchanged."""
    if buffer.peak == 0.0:
        return buffer
    return AudioBuffer(samples=peak_normalize(buffer.samples), sample_rate_hz=buffer.sample_rate_hz)

# shotsense/services/detector.py
"""
Sliding-window impulsive sound detector.

The signal is peak-normalized in blocks of `norm_block_len` samples, then cut
into `window_len`-sample windows every `hop` samples. Each window is
transformed, and the mean and population variance of |X[k]| over
bin_lo..bin_hi decide whether it holds an impulsive sound.

`detect` and `detect_stream` both drive the same `Detector` engine, which only
analyses windows once every sample they cover has been normalized. Windows are
therefore analysed in the same batches whatever the chunking, and both paths
give bit-identical events.
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Iterable, Iterator

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from shotsense.errors import BufferTooShortError, IoFailureError, MalformedHeaderError, WrongSampleRateError
from shotsense.models import AudioBuffer, DetectionEvent, DetectorConfig, SpectralWindow
from shotsense.services.audio_io import peak_normalize
from shotsense.services.spectral import band_stats, dft, dft_frames, magnitudes, spectral_stats
from shotsense.utils import iter_jsonl, write_jsonl

log = logging.getLogger(__name__)


def is_impulsive(mean: Any, variance: Any, config: DetectorConfig) -> Any:
    """Decision rule: strict '>' on both the band mean and the band variance."""
    return (np.asarray(mean) > config.mean_threshold) & (np.asarray(variance) > config.var_threshold)


def _check_rate(rate_hz: int, config: DetectorConfig) -> None:
    if rate_hz != config.required_rate_hz:
        raise WrongSampleRateError(
            f"detector requires {config.required_rate_hz} Hz mono audio, got {rate_hz} Hz "
            "(resample before detection)"
        )


def normalize_blocks(samples: np.ndarray, block_len: int | None) -> np.ndarray:
    """Peak-normalize each block of block_len samples; None normalizes the whole array at once."""
    samples = np.asarray(samples, dtype=np.float64)
    if block_len is None:
        return peak_normalize(samples)
    out = np.empty_like(samples)
    for start in range(0, samples.size, block_len):
        out[start:start + block_len] = peak_normalize(samples[start:start + block_len])
    return out


class Detector:
    """
    Incremental detector. feed() accepts chunks of any size and returns the events
    whose windows became complete; flush() closes the final partial block.
    """

    def __init__(self, config: DetectorConfig | None = None):
        self.config = config or DetectorConfig()
        self._pending: list[np.ndarray] = []
        self._pending_len = 0
        self._tail = np.empty(0, dtype=np.float64)  # normalized, not yet consumed by windows
        self._tail_start = 0
        self._next_start = 0
        self._next_index = 0
        self.samples_in = 0
        self.windows_seen = 0
        self.max_mean = 0.0
        self.max_variance = 0.0

    # -------- input --------

    def feed(self, chunk: np.ndarray | Iterable[float]) -> list[DetectionEvent]:
        x = np.asarray(chunk, dtype=np.float64).reshape(-1)
        if x.size == 0:
            return []
        self.samples_in += int(x.size)
        self._pending.append(x)
        self._pending_len += int(x.size)

        block_len = self.config.norm_block_len
        if block_len is None or self._pending_len < block_len:
            return []

        buf = np.concatenate(self._pending)
        n_full = buf.size // block_len
        events: list[DetectionEvent] = []
        for b in range(n_full):
            events.extend(self._push(peak_normalize(buf[b * block_len:(b + 1) * block_len])))
        rest = buf[n_full * block_len:]
        self._pending = [rest] if rest.size else []
        self._pending_len = int(rest.size)
        return events

    def flush(self) -> list[DetectionEvent]:
        if not self._pending:
            return []
        block = np.concatenate(self._pending)
        self._pending = []
        self._pending_len = 0
        return self._push(peak_normalize(block))

    # -------- analysis --------

    def _push(self, normalized: np.ndarray) -> list[DetectionEvent]:
        cfg = self.config
        self._tail = np.concatenate([self._tail, normalized])
        tail_end = self._tail_start + self._tail.size
        available = tail_end - self._next_start
        n_win = (available - cfg.window_len) // cfg.hop + 1 if available >= cfg.window_len else 0

        events: list[DetectionEvent] = []
        if n_win > 0:
            rel = self._next_start - self._tail_start
            frames = sliding_window_view(self._tail[rel:], cfg.window_len)[::cfg.hop][:n_win]
            mags = np.abs(dft_frames(frames))
            mean, var = band_stats(mags, cfg.bin_lo, cfg.bin_hi)
            self.windows_seen += n_win
            self.max_mean = max(self.max_mean, float(mean.max()))
            self.max_variance = max(self.max_variance, float(var.max()))

            for i in np.flatnonzero(is_impulsive(mean, var, cfg)):
                start = self._next_start + int(i) * cfg.hop
                events.append(
                    DetectionEvent(
                        window_index=self._next_index + int(i),
                        start_sample=start,
                        start_time_s=start / cfg.required_rate_hz,
                        mean=float(mean[i]),
                        variance=float(var[i]),
                        hf_slice=tuple(mags[i, cfg.bin_lo:cfg.bin_hi + 1].tolist()),
                    )
                )
            self._next_start += n_win * cfg.hop
            self._next_index += n_win
            log.debug("analysed %d window(s), %d event(s)", n_win, len(events))

        drop = min(self._next_start - self._tail_start, self._tail.size)
        self._tail = self._tail[drop:]
        self._tail_start += drop
        return events

    def summary(self) -> dict[str, Any]:
        return {
            "samples": self.samples_in,
            "windows": self.windows_seen,
            "max_mean": self.max_mean,
            "max_variance": self.max_variance,
        }


def detect_with_summary(
    buffer: AudioBuffer, config: DetectorConfig | None = None
) -> tuple[list[DetectionEvent], dict[str, Any]]:
    config = config or DetectorConfig()
    _check_rate(buffer.sample_rate_hz, config)
    if len(buffer) < config.window_len:
        raise BufferTooShortError(
            f"buffer has {len(buffer)} samples, at least one window ({config.window_len}) is required"
        )
    det = Detector(config)
    events = det.feed(buffer.samples) + det.flush()
    return events, det.summary()


def detect(buffer: AudioBuffer, config: DetectorConfig | None = None) -> list[DetectionEvent]:
    """Offline detection over a whole buffer; events are ordered by start_sample."""
    return detect_with_summary(buffer, config)[0]


def detect_stream(
    chunks: Iterable[AudioBuffer | np.ndarray],
    config: DetectorConfig | None = None,
    *,
    sample_rate_hz: int | None = None,
) -> Iterator[DetectionEvent]:
    """
    Streaming detection. Chunks may be AudioBuffers (rate checked per chunk) or bare
    arrays at `sample_rate_hz` (defaults to the required rate). Events are yielded as
    soon as their normalization block is complete.
    """
    config = config or DetectorConfig()
    if sample_rate_hz is not None:
        _check_rate(sample_rate_hz, config)
    det = Detector(config)
    for chunk in chunks:
        if isinstance(chunk, AudioBuffer):
            _check_rate(chunk.sample_rate_hz, config)
            chunk = chunk.samples
        yield from det.feed(chunk)
    yield from det.flush()


def analyze_window(buffer: AudioBuffer, start_sample: int, config: DetectorConfig | None = None) -> SpectralWindow:
    """Spectral stats of the single window starting at start_sample, with no threshold applied."""
    config = config or DetectorConfig()
    _check_rate(buffer.sample_rate_hz, config)
    if start_sample < 0 or start_sample + config.window_len > len(buffer):
        raise BufferTooShortError(
            f"window [{start_sample}, {start_sample + config.window_len}) outside buffer of {len(buffer)} samples"
        )
    normalized = normalize_blocks(buffer.samples, config.norm_block_len)
    spectrum = dft(normalized[start_sample:start_sample + config.window_len], config.window_len, method="fft")
    mags = magnitudes(spectrum)
    stats = spectral_stats(mags, config.bin_lo, config.bin_hi)
    return SpectralWindow(
        window_index=start_sample // config.hop,
        start_sample=start_sample,
        mean=stats.mean,
        variance=stats.variance,
        hf_slice=tuple(mags[config.bin_lo:config.bin_hi + 1].tolist()),
        spectrum=spectrum,
    )


# -------- event files --------

def write_events(path: Path, events: Iterable[DetectionEvent]) -> int:
    """One JSON object per line with exactly the DetectionEvent fields."""
    return write_jsonl(path, (e.to_dict() for e in events))


def read_events(path: Path) -> list[DetectionEvent]:
    events: list[DetectionEvent] = []
    try:
        for lineno, d in iter_jsonl(path):
            try:
                events.append(DetectionEvent.from_dict(d))
            except (KeyError, TypeError, ValueError) as e:
                raise MalformedHeaderError(f"{path.name}:{lineno}: bad event record: {e!r}") from e
    except OSError as e:
        raise IoFailureError(f"cannot read {path}: {e}") from e
    return events

# shotsense/models.py
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Literal, Sequence

import numpy as np

from shotsense.errors import ConfigError, EmptyClassError, DimensionMismatchError


def _frozen_array(values: Any, dtype: Any) -> np.ndarray:
    arr = np.array(values, dtype=dtype).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    """Mono signal x[n] with its sampling rate. Samples are a read-only float64 array."""
    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", _frozen_array(self.samples, np.float64))
        if int(self.sample_rate_hz) <= 0:
            raise ConfigError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.samples))) if len(self) else 0.0


@dataclass(frozen=True, eq=False)
class ComplexSpectrum:
    bins: np.ndarray
    n_points: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "bins", _frozen_array(self.bins, np.complex128))
        if self.bins.size != self.n_points:
            raise ConfigError("bins length must equal n_points")


@dataclass(frozen=True)
class SpectralStats:
    mean: float
    variance: float
    bin_lo: int
    bin_hi: int

    @property
    def n_bins(self) -> int:
        return self.bin_hi - self.bin_lo + 1


# ---------------------------------------------------------------------
# Detector
# ---------------------------------------------------------------------
@dataclass(frozen=True)
class DetectorConfig:
    """
    Parameters of the sliding-window detector.

    norm_block_len=None normalizes the whole buffer at once (offline mode);
    otherwise every block of norm_block_len samples is peak-normalized on its own
    and the final partial block is kept.
    """
    window_len: int = 99
    hop: int = 99
    bin_lo: int = 30
    bin_hi: int = 49
    mean_threshold: float = 0.5
    var_threshold: float = 0.2
    required_rate_hz: int = 16000
    norm_block_len: int | None = 16000

    def __post_init__(self) -> None:
        if self.window_len <= 0:
            raise ConfigError("window_len must be positive")
        if not 0 < self.hop <= self.window_len:
            raise ConfigError(f"hop must satisfy 0 < hop <= window_len ({self.window_len}), got {self.hop}")
        if not 0 <= self.bin_lo <= self.bin_hi < self.window_len:
            raise ConfigError(
                f"bin range [{self.bin_lo}, {self.bin_hi}] must lie inside [0, {self.window_len - 1}]"
            )
        if self.mean_threshold <= 0 or self.var_threshold <= 0:
            raise ConfigError("thresholds must be positive")
        if self.required_rate_hz <= 0:
            raise ConfigError("required_rate_hz must be positive")
        if self.norm_block_len is not None and self.norm_block_len <= 0:
            raise ConfigError("norm_block_len must be positive (or None for whole-buffer mode)")

    @property
    def n_bins(self) -> int:
        return self.bin_hi - self.bin_lo + 1

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class DetectionEvent:
    window_index: int
    start_sample: int
    start_time_s: float
    mean: float
    variance: float
    hf_slice: tuple[float, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "window_index": self.window_index,
            "start_sample": self.start_sample,
            "start_time_s": self.start_time_s,
            "mean": self.mean,
            "variance": self.variance,
            "hf_slice": list(self.hf_slice),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "DetectionEvent":
        return cls(
            window_index=int(d["window_index"]),
            start_sample=int(d["start_sample"]),
            start_time_s=float(d["start_time_s"]),
            mean=float(d["mean"]),
            variance=float(d["variance"]),
            hf_slice=tuple(float(v) for v in d["hf_slice"]),
        )


@dataclass(frozen=True, eq=False)
class SpectralWindow:
    """One analysed window, whether or not it passed the decision rule."""
    window_index: int
    start_sample: int
    mean: float
    variance: float
    hf_slice: tuple[float, ...]
    spectrum: ComplexSpectrum | None = None


# ---------------------------------------------------------------------
# Corpus
# ---------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class EmbedSpec:
    """offset=None draws the embedding point from seed."""
    impulse: AudioBuffer
    noise: AudioBuffer
    offset: int | None = None
    gain: float = 1.0
    seed: int = 0


@dataclass(frozen=True)
class SnrReport:
    snr_db: float
    signal_energy: float
    noise_energy: float
    offset: int
    span: int

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


# ---------------------------------------------------------------------
# Features
# ---------------------------------------------------------------------
FeatureKind = Literal["hf_amplitude", "mfcc"]


@dataclass(frozen=True)
class FeatureVector:
    values: tuple[float, ...]
    kind: FeatureKind
    label: str | None = None

    def __post_init__(self) -> None:
        vals = tuple(float(v) for v in self.values)
        if not all(np.isfinite(vals)):
            raise ConfigError("feature values must be finite")
        if self.kind not in ("hf_amplitude", "mfcc"):
            raise ConfigError(f"unknown feature kind: {self.kind}")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class MfccConfig:
    context_len: int = 512
    fft_len: int = 512
    n_filters: int = 26
    n_coeffs: int = 13
    log_floor: float = 1e-10
    pre_emphasis: float = 0.97
    window_fn: Literal["hamming"] = "hamming"
    f_min_hz: float = 0.0
    f_max_hz: float | None = None  # None → Nyquist

    def __post_init__(self) -> None:
        if self.n_coeffs > self.n_filters:
            raise ConfigError("n_coeffs must not exceed n_filters")
        if self.context_len > self.fft_len:
            raise ConfigError("context_len must not exceed fft_len")
        if self.context_len <= 0 or self.n_coeffs <= 0 or self.log_floor <= 0:
            raise ConfigError("context_len, n_coeffs and log_floor must be positive")
        if self.window_fn != "hamming":
            raise ConfigError(f"unsupported window_fn: {self.window_fn}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


# ---------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class LabeledDataset:
    vectors: tuple[FeatureVector, ...]
    class_names: tuple[str, ...]

    @classmethod
    def from_vectors(cls, vectors: Sequence[FeatureVector], class_names: Sequence[str] | None = None) -> "LabeledDataset":
        """Validate uniform kind/length/labels; class order defaults to sorted labels."""
        vectors = tuple(vectors)
        if not vectors:
            raise EmptyClassError("dataset is empty")
        dim, kind = len(vectors[0]), vectors[0].kind
        for v in vectors:
            if v.label is None:
                raise EmptyClassError("every vector in a dataset needs a label")
            if len(v) != dim or v.kind != kind:
                raise DimensionMismatchError(
                    f"mixed feature vectors: expected {kind}[{dim}], got {v.kind}[{len(v)}]"
                )
        labels = sorted({v.label for v in vectors if v.label is not None})
        names = tuple(class_names) if class_names is not None else tuple(labels)
        missing = set(labels) - set(names)
        if missing:
            raise EmptyClassError(f"labels not among class_names: {sorted(missing)}")
        return cls(vectors=vectors, class_names=names)

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def dim(self) -> int:
        return len(self.vectors[0])

    @property
    def kind(self) -> FeatureKind:
        return self.vectors[0].kind

    def matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """(X, y) with y holding class indices into class_names."""
        x = np.array([v.values for v in self.vectors], dtype=np.float64)
        index = {name: i for i, name in enumerate(self.class_names)}
        y = np.array([index[v.label] for v in self.vectors], dtype=np.int64)
        return x, y

    def subset(self, idx: Sequence[int]) -> "LabeledDataset":
        return LabeledDataset(vectors=tuple(self.vectors[i] for i in idx), class_names=self.class_names)

    def relabel(self, labels: Sequence[str]) -> "LabeledDataset":
        vecs = tuple(FeatureVector(v.values, v.kind, lab) for v, lab in zip(self.vectors, labels))
        return LabeledDataset(vectors=vecs, class_names=self.class_names)


@dataclass(frozen=True)
class EvalReport:
    folds: int
    per_fold: tuple[tuple[int, int, int, int], ...]  # (tp, fp, tn, fn)
    tpr: float
    fpr: float
    accuracy: float
    feature_kind: str
    algorithm_name: str
    positive_label: str
    seed: int
    averaging: str = "micro"

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["per_fold"] = [list(c) for c in self.per_fold]
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EvalReport":
        return cls(
            folds=int(d["folds"]),
            per_fold=tuple(tuple(int(c) for c in row) for row in d["per_fold"]),  # type: ignore[misc]
            tpr=float(d["tpr"]),
            fpr=float(d["fpr"]),
            accuracy=float(d["accuracy"]),
            feature_kind=str(d["feature_kind"]),
            algorithm_name=str(d["algorithm_name"]),
            positive_label=str(d["positive_label"]),
            seed=int(d["seed"]),
            averaging=str(d.get("averaging", "micro")),
        )


@dataclass(frozen=True)
class RunManifest:
    command: str
    config_snapshot: dict[str, Any]
    input_hashes: dict[str, str] = field(default_factory=dict)
    seed: int | None = None
    tool_version: str = ""
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

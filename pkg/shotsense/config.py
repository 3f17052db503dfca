from pathlib import Path
from typing import Any, Literal
import os
import tomllib

from pydantic import BaseModel, Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from shotsense.errors import ConfigError
from shotsense.models import DetectorConfig, MfccConfig

# Canonical default config location (used by `shot init`)
DEFAULT_CONFIG_PATH = "~/.config/shotsense/config.toml"
LOCAL_CONFIG_NAME = "shotsense.toml"


def _resolve_config_path(path: str | None) -> Path | None:
    """
    Resolve the configuration file path in priority order:
    1) Explicit path argument (if provided; must exist)
    2) SHOTSENSE_CONFIG environment variable (if set)
    3) ./shotsense.toml in current working directory
    4) ~/.config/shotsense/config.toml
    Returns None when no file is found; defaults then apply.
    """
    if path:
        p = Path(path).expanduser()
        if not p.is_file():
            raise ConfigError(f"Config file not found: {p}")
        return p
    candidates: list[Path] = []
    env_path = os.getenv("SHOTSENSE_CONFIG")
    if env_path:
        candidates.append(Path(env_path).expanduser())
    candidates.append(Path(LOCAL_CONFIG_NAME).absolute())
    candidates.append(Path(DEFAULT_CONFIG_PATH).expanduser())
    for p in candidates:
        if p.is_file():
            return p
    return None


class DetectorSection(BaseModel):
    window_len: int = 99
    hop: int = 99
    bin_lo: int = 30
    bin_hi: int = 49
    mean_threshold: float = 0.5
    var_threshold: float = 0.2
    required_rate_hz: int = 16000
    norm_block_len: int = 16000
    whole_file_norm: bool = False


class MfccSection(BaseModel):
    context_len: int = 512
    fft_len: int = 512
    n_filters: int = 26
    n_coeffs: int = 13
    log_floor: float = 1e-10
    pre_emphasis: float = 0.97


class SvmSection(BaseModel):
    c_param: float = 100.0  # weight of the mean hinge loss
    epochs: int = 500


class KnnSection(BaseModel):
    k: int = 5


class EvalSection(BaseModel):
    folds: int = 8
    seed: int = 0
    algo: Literal["svm", "knn"] = "svm"


class SynthSection(BaseModel):
    impulse_duration_s: float = 0.006
    impulse_decay_s: float = 0.002
    hf_emphasis: float = 0.95
    noise_kind: Literal["white", "lowpass", "babble_like"] = "lowpass"
    noise_duration_s: float = 1.0
    seed: int = 0


class Settings(BaseSettings):
    """
    Effective configuration. Values come from (highest first): the TOML file,
    SHOTSENSE_* environment variables (e.g. SHOTSENSE_DETECTOR__HOP=49), defaults.
    CLI flags are applied on top by the commands themselves.
    """
    model_config = SettingsConfigDict(env_prefix="SHOTSENSE_", env_nested_delimiter="__", extra="ignore")

    detector: DetectorSection = Field(default_factory=DetectorSection)
    mfcc: MfccSection = Field(default_factory=MfccSection)
    svm: SvmSection = Field(default_factory=SvmSection)
    knn: KnnSection = Field(default_factory=KnnSection)
    eval: EvalSection = Field(default_factory=EvalSection)
    synth: SynthSection = Field(default_factory=SynthSection)

    source_path: Path | None = None

    def detector_config(self) -> DetectorConfig:
        d = self.detector
        return DetectorConfig(
            window_len=d.window_len,
            hop=d.hop,
            bin_lo=d.bin_lo,
            bin_hi=d.bin_hi,
            mean_threshold=d.mean_threshold,
            var_threshold=d.var_threshold,
            required_rate_hz=d.required_rate_hz,
            norm_block_len=None if d.whole_file_norm else d.norm_block_len,
        )

    def mfcc_config(self) -> MfccConfig:
        return MfccConfig(**self.mfcc.model_dump())

    def snapshot(self) -> dict[str, Any]:
        """Config as plain data for run manifests."""
        return self.model_dump(mode="json", exclude={"source_path"})


def default_config_dict() -> dict[str, Any]:
    return Settings.model_construct().snapshot()


def load_settings(path: str | None = None) -> Settings:
    cfg_path = _resolve_config_path(path)
    data: dict[str, Any] = {}
    if cfg_path is not None:
        try:
            with open(cfg_path, "rb") as f:
                data = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"Invalid TOML in {cfg_path}: {e}") from e
    try:
        return Settings(**data, source_path=cfg_path)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration in {cfg_path}: {e}") from e

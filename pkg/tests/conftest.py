import numpy as np
import pytest

from shotsense.models import AudioBuffer
from shotsense.services.corpus import synth_impulse


@pytest.fixture(autouse=True)
def temp_config(tmp_path, monkeypatch):
    cfg = (
        "[detector]\n"
        "hop = 99\n"
        "mean_threshold = 0.5\n"
        "var_threshold = 0.2\n"
        "\n"
        "[eval]\n"
        "folds = 8\n"
        "seed = 0\n"
        "\n"
        "[synth]\n"
        "noise_kind = \"lowpass\"\n"
        "seed = 0\n"
    )
    cfg_path = tmp_path / "shotsense.toml"
    cfg_path.write_text(cfg, encoding="utf-8")
    monkeypatch.setenv("SHOTSENSE_CONFIG", str(cfg_path))
    yield
    monkeypatch.delenv("SHOTSENSE_CONFIG", raising=False)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def burst():
    return synth_impulse(seed=7)


@pytest.fixture
def burst_in_silence(burst):
    """1 s of silence with the default burst starting at 0.5 s."""
    x = np.zeros(16000)
    x[8000:8000 + len(burst)] = burst.samples
    return AudioBuffer(samples=x, sample_rate_hz=16000)

import json

import numpy as np
from click.testing import CliRunner

from shotsense import __version__
from shotsense.cli import cli
from shotsense.models import AudioBuffer, FeatureVector
from shotsense.services.audio_io import save_wav
from shotsense.services.features import export_features


def _invoke(*args):
    return CliRunner().invoke(cli, [str(a) for a in args])


def test_version_and_usage():
    result = _invoke("--version")
    assert result.exit_code == 0 and __version__ in result.output
    assert _invoke("detect").exit_code == 2


def test_init_writes_config(tmp_path):
    p = tmp_path / "cfg" / "config.toml"
    result = _invoke("init", "--path", p)
    assert result.exit_code == 0, result.output
    assert "[detector]" in p.read_text(encoding="utf-8")
    again = _invoke("init", "--path", p)
    assert "already exists" in again.output
    result = _invoke("--config", p, "-v", "synth", "noise", "--duration", "0.1", "-o", tmp_path / "n.wav")
    assert result.exit_code == 0, result.output


def test_detect_silence(tmp_path):
    wav = save_wav(AudioBuffer(samples=np.zeros(16000), sample_rate_hz=16000), tmp_path / "silence.wav")
    result = _invoke("detect", wav)
    assert result.exit_code == 0, result.output
    assert result.output.splitlines()[0] == "0 events"


def test_detect_burst_writes_events(tmp_path, burst_in_silence):
    wav = save_wav(burst_in_silence, tmp_path / "shot.wav")
    out = tmp_path / "events.jsonl"
    result = _invoke("detect", wav, "--json", out)
    assert result.exit_code == 0, result.output
    rows = [json.loads(line) for line in out.read_text(encoding="utf-8").splitlines()]
    assert rows
    assert set(rows[0]) == {"window_index", "start_sample", "start_time_s", "mean", "variance", "hf_slice"}
    assert abs(rows[0]["start_time_s"] - 0.5) <= 99 / 16000
    manifest = json.loads((tmp_path / "events.jsonl.manifest.json").read_text(encoding="utf-8"))
    assert manifest["command"] == "detect"
    assert str(wav) in manifest["input_hashes"]
    assert manifest["tool_version"] == __version__
    assert "max mean=" in result.output


def test_detect_input_errors(tmp_path):
    wav = save_wav(AudioBuffer(samples=np.zeros(8000), sample_rate_hz=8000), tmp_path / "8k.wav")
    result = _invoke("detect", wav)
    assert result.exit_code == 3
    assert "16000 Hz" in result.output
    assert _invoke("detect", tmp_path / "missing.wav").exit_code == 3


def _synth_inputs(tmp_path):
    assert _invoke("synth", "impulse", "--seed", "1", "-o", tmp_path / "burst.wav").exit_code == 0
    r = _invoke("synth", "noise", "--kind", "lowpass", "--duration", "1", "--seed", "2", "-o", tmp_path / "noise.wav")
    assert r.exit_code == 0, r.output
    return tmp_path / "burst.wav", tmp_path / "noise.wav"


def test_embed_target_snr(tmp_path):
    burst, noise = _synth_inputs(tmp_path)
    out = tmp_path / "mix.wav"
    result = _invoke("embed", "--impulse", burst, "--noise", noise, "--offset", "4000", "--target-snr", "0", "-o", out)
    assert result.exit_code == 0, result.output
    manifest = json.loads((tmp_path / "mix.wav.manifest.json").read_text(encoding="utf-8"))
    assert abs(manifest["extra"]["snr_db"]) < 1e-6
    assert manifest["extra"]["offset"] == 4000

    loud = tmp_path / "loud.wav"
    result = _invoke("embed", "--impulse", burst, "--noise", noise, "--offset", "4000", "--target-snr", "20", "-o", loud)
    assert result.exit_code == 0, result.output
    detected = _invoke("detect", loud, "--json", tmp_path / "ev.jsonl")
    assert detected.exit_code == 0, detected.output
    starts = [json.loads(line)["start_sample"] for line in (tmp_path / "ev.jsonl").read_text().splitlines()]
    assert any(abs(s - 4000) <= 99 for s in starts)


def test_embed_random_is_reproducible(tmp_path):
    burst, noise = _synth_inputs(tmp_path)
    outs = []
    for name in ("a.wav", "b.wav"):
        result = _invoke("embed", "--impulse", burst, "--noise", noise, "--random", "--seed", "5", "-o", tmp_path / name)
        assert result.exit_code == 0, result.output
        outs.append(result.output.splitlines()[0])
    assert outs[0] == outs[1]
    assert (tmp_path / "a.wav").read_bytes() == (tmp_path / "b.wav").read_bytes()


def test_embed_usage_and_range_errors(tmp_path):
    burst, noise = _synth_inputs(tmp_path)
    out = tmp_path / "x.wav"
    assert _invoke("embed", "--impulse", burst, "--noise", noise, "-o", out).exit_code == 2
    bad = _invoke("embed", "--impulse", burst, "--noise", noise, "--offset", "15990", "-o", out)
    assert bad.exit_code == 3


def _separable_csv(path):
    rng = np.random.default_rng(0)
    vectors = [FeatureVector(tuple(rng.uniform(0, 1, 2)), "mfcc", "background") for _ in range(8)]
    vectors += [FeatureVector(tuple(rng.uniform(3, 4, 2)), "mfcc", "gunshot") for _ in range(8)]
    return export_features(vectors, path)


def test_eval_separable_fixture(tmp_path):
    data = _separable_csv(tmp_path / "sep.csv")
    r1 = _invoke("eval", "--data", data, "--folds", "8", "--seed", "1", "--out", tmp_path / "r1.json")
    assert r1.exit_code == 0, r1.output
    row = [line for line in r1.output.splitlines() if line.startswith("MFCC")][0]
    assert row.split()[-2:] == ["100.0", "0.0"]

    r2 = _invoke("eval", "--data", data, "--folds", "8", "--seed", "1", "--out", tmp_path / "r2.json")
    assert r2.exit_code == 0, r2.output
    assert (tmp_path / "r1.json").read_bytes() == (tmp_path / "r2.json").read_bytes()

    table = _invoke("table", tmp_path / "r1.json", tmp_path / "r2.json")
    assert table.exit_code == 0 and table.output.count("MFCC") == 2


def test_eval_rejects_bad_csv(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,2\n", encoding="utf-8")
    assert _invoke("eval", "--data", bad).exit_code == 3
    tiny = export_features([FeatureVector((0.0,), "mfcc", "a"), FeatureVector((1.0,), "mfcc", "b")],
                           tmp_path / "tiny.csv")
    assert _invoke("eval", "--data", tiny).exit_code == 3


def test_features_from_events_and_corpus(tmp_path, burst_in_silence):
    wav = save_wav(burst_in_silence, tmp_path / "shot.wav")
    assert _invoke("detect", wav, "--json", tmp_path / "ev.jsonl").exit_code == 0
    result = _invoke("features", wav, "--events", tmp_path / "ev.jsonl", "--kind", "hf", "--label", "gunshot",
                     "-o", tmp_path / "hf.csv")
    assert result.exit_code == 0, result.output
    lines = (tmp_path / "hf.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0].endswith("f19,label")
    assert all(line.endswith(",gunshot") for line in lines[1:])

    assert _invoke("synth", "corpus", "--out-dir", tmp_path / "c", "--n-per-class", "8", "--seed", "3").exit_code == 0
    result = _invoke("features", "--corpus", tmp_path / "c" / "manifest.jsonl", "--kind", "mfcc",
                     "-o", tmp_path / "mfcc.csv")
    assert result.exit_code == 0, result.output
    rows = (tmp_path / "mfcc.csv").read_text(encoding="utf-8").splitlines()
    assert len(rows) == 17
    assert rows[0].endswith("f12,label")

    result = _invoke("eval", "--data", tmp_path / "mfcc.csv", "--algo", "knn", "--k", "3")
    assert result.exit_code == 0, result.output
    assert (tmp_path / "mfcc.csv.eval.json").exists()

    assert _invoke("features", wav, "--kind", "hf", "-o", tmp_path / "x.csv").exit_code == 2


def test_detect_rejects_zero_hop(tmp_path):
    wav = save_wav(AudioBuffer(samples=np.zeros(16000), sample_rate_hz=16000), tmp_path / "silence.wav")
    result = _invoke("detect", wav, "--hop", "0")
    assert result.exit_code == 2
    assert "--hop" in result.output
    assert _invoke("detect", wav, "--var-th", "0").exit_code == 2


def test_embed_at_minus_15_db_in_white_noise_is_detected(tmp_path):
    assert _invoke("synth", "impulse", "--seed", "1", "-o", tmp_path / "burst.wav").exit_code == 0
    r = _invoke("synth", "noise", "--kind", "white", "--duration", "1", "--seed", "2", "-o", tmp_path / "white.wav")
    assert r.exit_code == 0, r.output
    mix = tmp_path / "mix.wav"
    result = _invoke("embed", "--impulse", tmp_path / "burst.wav", "--noise", tmp_path / "white.wav",
                     "--offset", "4000", "--target-snr", "-15", "-o", mix)
    assert result.exit_code == 0, result.output
    detected = _invoke("detect", mix, "--json", tmp_path / "ev.jsonl")
    assert detected.exit_code == 0, detected.output
    starts = [json.loads(line)["start_sample"] for line in (tmp_path / "ev.jsonl").read_text().splitlines()]
    assert any(abs(s - 4000) <= 99 for s in starts)


def test_features_rejects_malformed_json(tmp_path, burst_in_silence):
    wav = save_wav(burst_in_silence, tmp_path / "shot.wav")
    truncated = tmp_path / "truncated.jsonl"
    truncated.write_text('{"window_index": 1, "start_sample"\n', encoding="utf-8")
    result = _invoke("features", wav, "--events", truncated, "--kind", "hf", "-o", tmp_path / "a.csv")
    assert result.exit_code == 3
    assert "truncated.jsonl:1" in result.output

    missing = tmp_path / "missing_keys.jsonl"
    missing.write_text('{"window_index": 1}\n', encoding="utf-8")
    assert _invoke("features", wav, "--events", missing, "--kind", "hf", "-o", tmp_path / "b.csv").exit_code == 3

    manifest = tmp_path / "manifest.jsonl"
    manifest.write_text('{"label": "x", "bogus": 1}\n', encoding="utf-8")
    result = _invoke("features", "--corpus", manifest, "--kind", "mfcc", "-o", tmp_path / "c.csv")
    assert result.exit_code == 3
    assert "manifest.jsonl:1" in result.output
    assert not (tmp_path / "c.csv").exists()


def test_features_rejects_corpus_with_events(tmp_path):
    manifest = tmp_path / "manifest.jsonl"
    manifest.write_text("", encoding="utf-8")
    events = tmp_path / "ev.jsonl"
    events.write_text("", encoding="utf-8")
    result = _invoke("features", "--corpus", manifest, "--events", events, "--kind", "hf", "-o", tmp_path / "x.csv")
    assert result.exit_code == 2
    assert not (tmp_path / "x.csv").exists()


def test_twenty_coefficient_mfcc_keeps_its_kind(tmp_path):
    cfg = tmp_path / "mfcc20.toml"
    cfg.write_text("[mfcc]\nn_coeffs = 20\n", encoding="utf-8")
    assert _invoke("synth", "corpus", "--out-dir", tmp_path / "c", "--n-per-class", "8", "--seed", "3").exit_code == 0
    result = _invoke("--config", cfg, "features", "--corpus", tmp_path / "c" / "manifest.jsonl", "--kind", "mfcc",
                     "-o", tmp_path / "mfcc20.csv")
    assert result.exit_code == 0, result.output
    assert (tmp_path / "mfcc20.csv").read_text(encoding="utf-8").splitlines()[0].endswith("f19,label")

    result = _invoke("eval", "--data", tmp_path / "mfcc20.csv", "--algo", "knn", "--k", "3")
    assert result.exit_code == 0, result.output
    report = json.loads((tmp_path / "mfcc20.csv.eval.json").read_text(encoding="utf-8"))
    assert report["feature_kind"] == "mfcc"
    assert "High Frequency" not in result.output

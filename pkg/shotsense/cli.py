# shotsense/cli.py
from __future__ import annotations

import dataclasses
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterator

import click

from shotsense import __version__
from shotsense.config import DEFAULT_CONFIG_PATH, Settings, default_config_dict, load_settings
from shotsense.errors import InputError
from shotsense.models import EmbedSpec, LabeledDataset
from shotsense.utils import make_manifest, write_manifest

from shotsense.log import setup_logging
setup_logging()


class DataError(click.ClickException):
    """Bad input data or file; exit code 3 (usage errors keep click's 2)."""

    exit_code = 3


@contextmanager
def data_errors() -> Iterator[None]:
    try:
        yield
    except InputError as e:
        raise DataError(str(e)) from e


def _settings(ctx: click.Context) -> Settings:
    with data_errors():
        return load_settings(ctx.obj.get("config_path") if ctx.obj else None)


def _plural(n: int, word: str) -> str:
    return f"{n} {word}" if n == 1 else f"{n} {word}s"


@click.group()
@click.version_option(__version__, prog_name="shot")
@click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="TOML config file (default: $SHOTSENSE_CONFIG, ./shotsense.toml, ~/.config/shotsense/config.toml).",
)
@click.option("-v", "--verbose", is_flag=True, help="Log at DEBUG level.")
@click.pass_context
def cli(ctx: click.Context, config_path: str | None, verbose: bool) -> None:
    """shotsense: impulsive sound detection and gunshot recognition.

    Exit codes: 0 success, 2 usage error, 3 bad input data.
    """
    if verbose:
        setup_logging("DEBUG")
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path


# ---------------------------------------------------------------------
# init: write the default config
# ---------------------------------------------------------------------
@cli.command("init")
@click.option("--path", "cfg_path", type=click.Path(dir_okay=False), default=DEFAULT_CONFIG_PATH,
              show_default=True, help="Where to write the config.")
@click.option("--force", is_flag=True, help="Overwrite an existing config file.")
def init_command(cfg_path: str, force: bool) -> None:
    """Write a config file holding every default value."""
    try:
        import tomli_w  # type: ignore
    except Exception as e:
        raise click.ClickException(
            "tomli_w is required for 'shot init'. Install it with: uv add tomli_w"
        ) from e

    path = Path(cfg_path).expanduser()
    if path.exists() and not force:
        click.echo(f"Config already exists at {path} (use --force to overwrite).")
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        tomli_w.dump(default_config_dict(), f)
    click.echo(f"Wrote default config to {path}")


# ---------------------------------------------------------------------
# detect
# ---------------------------------------------------------------------
@cli.command()
@click.argument("wav", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--hop", type=click.IntRange(min=1), default=None,
              help="Window hop in samples (default: window length).")
@click.option("--mean-th", type=click.FloatRange(min=0, min_open=True), default=None, help="High-band mean threshold.")
@click.option("--var-th", type=click.FloatRange(min=0, min_open=True), default=None, help="High-band variance threshold.")
@click.option("--whole-file-norm", is_flag=True, help="Peak-normalize the whole file instead of 1 s blocks.")
@click.option("--json", "json_out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Write events as JSON lines (plus a .manifest.json sidecar).")
@click.pass_context
def detect(ctx: click.Context, wav: Path, hop: int | None, mean_th: float | None, var_th: float | None,
           whole_file_norm: bool, json_out: Path | None) -> None:
    """Find impulsive sounds in a 16 kHz mono WAV file."""
    from shotsense.services.audio_io import load_wav
    from shotsense.services.detector import detect_with_summary, write_events

    s = _settings(ctx)
    with data_errors():
        cfg = s.detector_config()
        overrides: dict[str, Any] = {}
        if hop is not None:
            overrides["hop"] = hop
        if mean_th is not None:
            overrides["mean_threshold"] = mean_th
        if var_th is not None:
            overrides["var_threshold"] = var_th
        if whole_file_norm:
            overrides["norm_block_len"] = None
        cfg = dataclasses.replace(cfg, **overrides)

        buffer = load_wav(wav)
        events, summary = detect_with_summary(buffer, cfg)

        click.echo(_plural(len(events), "event"))
        for e in events:
            click.echo(
                f"{e.window_index:7d}  t={e.start_time_s:9.4f}s  mean={e.mean:.3f}  var={e.variance:.3f}"
            )
        click.echo(
            f"max mean={summary['max_mean']:.3f}  max var={summary['max_variance']:.3f}  "
            f"over {_plural(summary['windows'], 'window')}"
        )

        if json_out is not None:
            write_events(json_out, events)
            snapshot = s.snapshot()
            snapshot["detector"] = cfg.to_dict()
            write_manifest(json_out, make_manifest("detect", snapshot, [wav], extra={"events": len(events), **summary}))
            click.echo(f"Wrote {json_out}")


# ---------------------------------------------------------------------
# embed
# ---------------------------------------------------------------------
@cli.command()
@click.option("--impulse", "impulse_path", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--noise", "noise_path", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--offset", type=int, default=None, help="Embedding point in samples.")
@click.option("--random", "random_offset", is_flag=True, help="Draw the embedding point from --seed.")
@click.option("--seed", type=int, default=None, help="Seed for --random (default: [synth] seed).")
@click.option("--gain", type=float, default=None, help="Impulse gain (default 1).")
@click.option("--target-snr", type=float, default=None, help="Solve the gain for this SNR in dB.")
@click.option("-o", "--out", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.pass_context
def embed(ctx: click.Context, impulse_path: Path, noise_path: Path, offset: int | None, random_offset: bool,
          seed: int | None, gain: float | None, target_snr: float | None, out: Path) -> None:
    """Mix an impulse into noise and report the SNR over the impulse span."""
    from shotsense.services.audio_io import load_wav, save_wav
    from shotsense.services.corpus import embed as embed_impulse, gain_for_snr, resolve_offset

    if (offset is None) == (not random_offset):
        raise click.UsageError("give exactly one of --offset N or --random")
    if gain is not None and target_snr is not None:
        raise click.UsageError("--gain and --target-snr are mutually exclusive")

    s = _settings(ctx)
    seed = s.synth.seed if seed is None else seed
    with data_errors():
        impulse = load_wav(impulse_path)
        noise = load_wav(noise_path)
        at = resolve_offset(EmbedSpec(impulse=impulse, noise=noise, offset=offset, seed=seed))
        if target_snr is not None:
            g = gain_for_snr(impulse, noise, at, target_snr)
        else:
            g = 1.0 if gain is None else gain
        mixture, report = embed_impulse(EmbedSpec(impulse=impulse, noise=noise, offset=at, gain=g, seed=seed))
        save_wav(mixture, out, clip=True)
        extra = {"gain": g, **report.to_dict()}
        write_manifest(out, make_manifest("embed", s.snapshot(), [impulse_path, noise_path], seed=seed, extra=extra))
    click.echo(f"offset={at}  gain={g:.6f}  snr_db={report.snr_db:.3f}")
    click.echo(f"Wrote {out}")


# ---------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------
@cli.group()
def synth() -> None:
    """Generate synthetic impulses, noise and two-class corpora."""


@synth.command("impulse")
@click.option("--duration", type=float, default=None, help="Length in seconds (3-7 ms).")
@click.option("--decay", type=float, default=None, help="Exponential decay constant in seconds.")
@click.option("--hf-emphasis", type=float, default=None, help="High-pass tilt coefficient.")
@click.option("--tonal", "tonal_hz", type=float, default=None, help="Make a damped tone at this frequency instead.")
@click.option("--seed", type=int, default=None)
@click.option("-o", "--out", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.pass_context
def synth_impulse_cmd(ctx: click.Context, duration: float | None, decay: float | None, hf_emphasis: float | None,
                      tonal_hz: float | None, seed: int | None, out: Path) -> None:
    """Damped broadband burst (or tonal confuser)."""
    from shotsense.services.audio_io import save_wav
    from shotsense.services.corpus import synth_impulse, synth_tonal_impulse

    s = _settings(ctx)
    params = {
        "duration_s": s.synth.impulse_duration_s if duration is None else duration,
        "decay_s": s.synth.impulse_decay_s if decay is None else decay,
        "seed": s.synth.seed if seed is None else seed,
    }
    with data_errors():
        if tonal_hz is not None:
            buf = synth_tonal_impulse(tonal_hz, **params)
            params["freq_hz"] = tonal_hz
        else:
            params["hf_emphasis"] = s.synth.hf_emphasis if hf_emphasis is None else hf_emphasis
            buf = synth_impulse(**params)
        save_wav(buf, out)
        write_manifest(out, make_manifest("synth impulse", s.snapshot(), seed=params["seed"], extra=params))
    click.echo(f"Wrote {out} ({len(buf)} samples)")


@synth.command("noise")
@click.option("--kind", type=click.Choice(["white", "lowpass", "babble_like"]), default=None)
@click.option("--duration", type=float, default=None, help="Length in seconds.")
@click.option("--seed", type=int, default=None)
@click.option("-o", "--out", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.pass_context
def synth_noise_cmd(ctx: click.Context, kind: str | None, duration: float | None, seed: int | None,
                    out: Path) -> None:
    """Seeded white, lowpass or babble-like noise."""
    from shotsense.services.audio_io import save_wav
    from shotsense.services.corpus import synth_noise

    s = _settings(ctx)
    params = {
        "kind": kind or s.synth.noise_kind,
        "duration_s": s.synth.noise_duration_s if duration is None else duration,
        "seed": s.synth.seed if seed is None else seed,
    }
    with data_errors():
        buf = synth_noise(params["kind"], params["duration_s"], params["seed"])  # type: ignore[arg-type]
        save_wav(buf, out)
        write_manifest(out, make_manifest("synth noise", s.snapshot(), seed=params["seed"], extra=params))
    click.echo(f"Wrote {out} ({len(buf)} samples)")


@synth.command("corpus")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--n-per-class", type=int, default=100, show_default=True)
@click.option("--noise-kind", type=click.Choice(["white", "lowpass", "babble_like"]), default=None)
@click.option("--snr", "snr_db", type=float, default=0.0, show_default=True, help="Target SNR in dB.")
@click.option("--seed", type=int, default=None)
@click.pass_context
def synth_corpus_cmd(ctx: click.Context, out_dir: Path, n_per_class: int, noise_kind: str | None,
                     snr_db: float, seed: int | None) -> None:
    """Two-class corpus: broadband bursts vs tonal confusers, embedded in noise."""
    from shotsense.services.corpus import build_corpus

    s = _settings(ctx)
    seed = s.synth.seed if seed is None else seed
    kind = noise_kind or s.synth.noise_kind
    with data_errors():
        manifest = build_corpus(out_dir, n_per_class, noise_kind=kind, snr_db=snr_db, seed=seed)  # type: ignore[arg-type]
        extra = {"n_per_class": n_per_class, "noise_kind": kind, "snr_db": snr_db}
        write_manifest(manifest, make_manifest("synth corpus", s.snapshot(), seed=seed, extra=extra))
    click.echo(f"Wrote {2 * n_per_class} mixtures, manifest {manifest}")


# ---------------------------------------------------------------------
# features
# ---------------------------------------------------------------------
_KINDS = {"hf": "hf_amplitude", "mfcc": "mfcc"}


@cli.command()
@click.argument("wav", required=False, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--events", "events_path", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Events JSON lines from 'shot detect --json'.")
@click.option("--corpus", "corpus_path", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Corpus manifest; features are taken at each trial's embedding point.")
@click.option("--kind", type=click.Choice(sorted(_KINDS)), required=True)
@click.option("--label", default=None, help="Label for every row (with --events).")
@click.option("-o", "--out", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.pass_context
def features(ctx: click.Context, wav: Path | None, events_path: Path | None, corpus_path: Path | None,
             kind: str, label: str | None, out: Path) -> None:
    """Export hf or mfcc feature vectors as CSV."""
    from shotsense.services.audio_io import load_wav
    from shotsense.services.corpus import read_manifest
    from shotsense.services.detector import analyze_window, read_events
    from shotsense.services.features import export_features, feature_vectors

    use_events = wav is not None and events_path is not None and corpus_path is None
    use_corpus = corpus_path is not None and wav is None and events_path is None
    if not (use_events or use_corpus):
        raise click.UsageError("use either WAV --events E.jsonl or --corpus MANIFEST")

    s = _settings(ctx)
    feature_kind = _KINDS[kind]
    det_cfg = s.detector_config()
    mfcc_cfg = s.mfcc_config()
    with data_errors():
        if corpus_path is not None:
            vectors = []
            inputs = [corpus_path]
            for trial in read_manifest(corpus_path):
                path = corpus_path.parent / (trial.mixture_path or "")
                audio = load_wav(path)
                window = analyze_window(audio, trial.offset, det_cfg)
                vectors += feature_vectors(audio, [window], feature_kind, label=trial.label,  # type: ignore[arg-type]
                                           mfcc_config=mfcc_cfg, window_len=det_cfg.window_len)
        else:
            assert wav is not None and events_path is not None
            audio = load_wav(wav)
            events = read_events(events_path)
            inputs = [wav, events_path]
            vectors = feature_vectors(audio, events, feature_kind, label=label,  # type: ignore[arg-type]
                                      mfcc_config=mfcc_cfg, window_len=det_cfg.window_len)
        dim = det_cfg.n_bins if feature_kind == "hf_amplitude" else mfcc_cfg.n_coeffs
        export_features(vectors, out, dim=dim)
        write_manifest(out, make_manifest("features", s.snapshot(), inputs, extra={"kind": feature_kind,
                                                                                   "rows": len(vectors)}))
    click.echo(f"Wrote {_plural(len(vectors), 'vector')} to {out}")


# ---------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------
@cli.command("eval")
@click.option("--data", "data_paths", multiple=True, required=True,
              type=click.Path(dir_okay=False, path_type=Path), help="Feature CSV(s); rows are pooled.")
@click.option("--algo", type=click.Choice(["svm", "knn"]), default=None)
@click.option("--folds", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--k", "k", type=int, default=None, help="Neighbours for knn.")
@click.option("--c", "c_param", type=float, default=None, help="Hinge-loss weight for svm.")
@click.option("--positive", default=None, help="Positive class (default: gunshot, else the second class).")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="JSON report path (default: <first data>.eval.json).")
@click.pass_context
def eval_cmd(ctx: click.Context, data_paths: tuple[Path, ...], algo: str | None, folds: int | None,
             seed: int | None, k: int | None, c_param: float | None, positive: str | None,
             out: Path | None) -> None:
    """Stratified k-fold cross-validation of one classifier on labelled features."""
    from shotsense.reporters.report import render_table, write_report
    from shotsense.services.classify import cross_validate, get_algorithm
    from shotsense.services.features import import_features

    s = _settings(ctx)
    name = algo or s.eval.algo
    folds = s.eval.folds if folds is None else folds
    seed = s.eval.seed if seed is None else seed
    with data_errors():
        spec = get_algorithm(
            name,
            c_param=s.svm.c_param if c_param is None else c_param,
            epochs=s.svm.epochs,
            k=s.knn.k if k is None else k,
        )
        vectors = []
        for p in data_paths:
            vectors += import_features(p)
        dataset = LabeledDataset.from_vectors(vectors)
        report = cross_validate(dataset, spec, folds, seed, positive_label=positive)
        out = out or data_paths[0].with_name(data_paths[0].name + ".eval.json")
        write_report(report, out)
        write_manifest(out, make_manifest("eval", s.snapshot(), data_paths, seed=seed,
                                          extra={"algorithm": spec.name, "folds": folds}))
    click.echo(render_table([report]), nl=False)
    click.echo(f"Wrote {out}")


@cli.command("table")
@click.argument("reports", nargs=-1, required=True, type=click.Path(dir_okay=False, path_type=Path))
def table_cmd(reports: tuple[Path, ...]) -> None:
    """Combine saved evaluation reports into one feature x algorithm table."""
    from shotsense.reporters.report import read_report, render_table

    with data_errors():
        loaded = [read_report(p) for p in reports]
    click.echo(render_table(loaded), nl=False)


# allow `uv run -m shotsense.cli ...` and console entry point
if __name__ == "__main__":
    cli()

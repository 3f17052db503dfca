from __future__ import annotations
from pathlib import Path
from typing import Any, Iterable, Iterator
import hashlib
import json

from shotsense import __version__
from shotsense.errors import MalformedHeaderError
from shotsense.models import RunManifest


def sha256_file(path: Path, chunk_size: int = 1 << 20) -> str:
    """
    Stream the file and return a hex sha256 digest.
    """
    h = hashlib.sha256()
    with open(path, "rb") as f:
        while True:
            b = f.read(chunk_size)
            if not b:
                break
            h.update(b)
    return h.hexdigest()


def manifest_path_for(output: Path) -> Path:
    """Sidecar location: out.wav → out.wav.manifest.json"""
    return output.with_name(output.name + ".manifest.json")


def make_manifest(
    command: str,
    config_snapshot: dict[str, Any],
    inputs: Iterable[Path] = (),
    *,
    seed: int | None = None,
    extra: dict[str, Any] | None = None,
) -> RunManifest:
    hashes = {str(p): sha256_file(Path(p)) for p in inputs}
    return RunManifest(
        command=command,
        config_snapshot=config_snapshot,
        input_hashes=hashes,
        seed=seed,
        tool_version=__version__,
        extra=extra or {},
    )


def write_manifest(output: Path, manifest: RunManifest) -> Path:
    """
    Write the manifest beside `output`. Keys are sorted and no wall-clock
    values are included, so identical runs give identical bytes.
    """
    path = manifest_path_for(output)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_jsonl(path: Path, rows: Iterable[dict[str, Any]]) -> int:
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=False) + "\n")
            n += 1
    return n


def iter_jsonl(path: Path) -> Iterator[tuple[int, dict[str, Any]]]:
    """(line number, object) for every non-blank line; anything but a JSON object is malformed."""
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            s = line.strip()
            if not s:
                continue
            try:
                row = json.loads(s)
            except json.JSONDecodeError as e:
                raise MalformedHeaderError(f"{path.name}:{lineno}: invalid JSON: {e.msg}") from e
            if not isinstance(row, dict):
                raise MalformedHeaderError(f"{path.name}:{lineno}: expected a JSON object")
            yield lineno, row


def read_manifest_file(output: Path) -> RunManifest | None:
    """The sidecar manifest written for `output`, or None when there is none."""
    path = manifest_path_for(output)
    if not path.is_file():
        return None
    try:
        return RunManifest(**json.loads(path.read_text(encoding="utf-8")))
    except json.JSONDecodeError as e:
        raise MalformedHeaderError(f"{path.name}: invalid JSON: {e.msg}") from e
    except TypeError as e:
        raise MalformedHeaderError(f"{path.name}: not a run manifest: {e}") from e

# shotsense/reporters/report.py
from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

from shotsense.errors import IoFailureError, MalformedHeaderError
from shotsense.models import EvalReport

_FEATURE_TITLES = {
    "hf_amplitude": "High Frequency",
    "mfcc": "MFCC",
}


def render_table(reports: Sequence[EvalReport]) -> str:
    """
    Feature x algorithm table with TPR and FPR in percent, one row per report.
    Rates are micro-averaged over folds; the footer says so.
    """
    rows = [
        (
            _FEATURE_TITLES.get(r.feature_kind, r.feature_kind),
            r.algorithm_name,
            f"{100 * r.tpr:.1f}",
            f"{100 * r.fpr:.1f}",
        )
        for r in reports
    ]
    header = ("Feature", "Algorithm", "TPR (%)", "FPR (%)")
    widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h) for i, h in enumerate(header)]

    def fmt(row: Sequence[str]) -> str:
        left = [row[0].ljust(widths[0]), row[1].ljust(widths[1])]
        right = [row[2].rjust(widths[2]), row[3].rjust(widths[3])]
        return "  ".join(left + right).rstrip()

    lines = [fmt(header), "  ".join("-" * w for w in widths)]
    lines.extend(fmt(r) for r in rows)
    if reports:
        first = reports[0]
        lines.append("")
        lines.append(
            f"{first.folds}-fold stratified CV, seed {first.seed}, positive class "
            f"'{first.positive_label}'; rates are {first.averaging}-averaged over folds."
        )
    return "\n".join(lines) + "\n"


def write_report(report: EvalReport, path: Path) -> Path:
    """Write the report as indented, key-sorted JSON (no timestamps)."""
    path = Path(path).expanduser()
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise IoFailureError(f"cannot write {path}: {e}") from e
    return path


def read_report(path: Path) -> EvalReport:
    path = Path(path).expanduser()
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise IoFailureError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise MalformedHeaderError(f"{path.name}: not valid JSON ({e})") from e
    try:
        return EvalReport.from_dict(data)
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedHeaderError(f"{path.name}: not an evaluation report ({e})") from e

"""Result-file serialization: CSV body, '#'-prefixed metadata, JSON footers.

Layout (stable; the plotting frontend parses exactly this):

    # stochwave-result v1
    # kind: trace
    # created: <ISO timestamp, the only line allowed to differ between reruns>
    # tool_version: 0.1.0
    # seed: 1234
    # noise_truncation: 313
    # quadrature_order: 3
    # config: {...canonical JSON...}
    time,scheme,mean_H,stderr_H
    0.00000000000000000e+00,STM,...
    ...
    #footer: {"scheme": "STM", "slope": ..., "target_slope": ...}

Numbers are written in full-precision scientific notation, so rerunning
with the echoed seed reproduces the file byte for byte except for the
``created`` line.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .experiments import ExperimentResult

FORMAT_HEADER = "# stochwave-result v1"


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    return f"{float(value):.17e}"


def write_result(result: ExperimentResult, path) -> Path:
    """Serialize an ExperimentResult; returns the written path."""
    path = Path(path)
    lines = [FORMAT_HEADER]
    lines.append(f"# kind: {result.kind}")
    lines.append(f"# created: {datetime.now(timezone.utc).isoformat()}")
    for key in ("tool_version", "seed", "noise_truncation", "quadrature_order"):
        lines.append(f"# {key}: {result.provenance[key]}")
    for key, value in sorted(result.provenance.items()):
        if key in ("tool_version", "seed", "noise_truncation", "quadrature_order"):
            continue
        lines.append(f"# {key}: {_fmt(value)}")
    lines.append("# config: " + json.dumps(result.config, sort_keys=True))
    lines.append(",".join(result.columns))
    for row in result.rows:
        lines.append(",".join(_fmt(v) for v in row))
    for footer in result.footers:
        lines.append("#footer: " + json.dumps(footer, sort_keys=True))
    text = "\n".join(lines) + "\n"
    path.write_text(text)
    return path


@dataclass
class ParsedResult:
    kind: str
    config: dict
    meta: dict
    columns: tuple[str, ...]
    rows: list[tuple]
    footers: list[dict]


def read_result(path) -> ParsedResult:
    """Parse a result file written by :func:`write_result`."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != FORMAT_HEADER:
        raise ValueError(f"{path}: not a stochwave result file")
    kind = None
    config: dict = {}
    meta: dict = {}
    columns: tuple[str, ...] | None = None
    rows: list[tuple] = []
    footers: list[dict] = []
    for line in lines[1:]:
        if line.startswith("#footer:"):
            footers.append(json.loads(line[len("#footer:") :]))
        elif line.startswith("#"):
            key, _, value = line[1:].partition(":")
            key = key.strip()
            value = value.strip()
            if key == "kind":
                kind = value
            elif key == "config":
                config = json.loads(value)
            else:
                meta[key] = value
        elif columns is None:
            columns = tuple(line.split(","))
        elif line:
            cells = []
            for cell in line.split(","):
                try:
                    cells.append(float(cell))
                except ValueError:
                    cells.append(cell)
            rows.append(tuple(cells))
    if kind is None or columns is None:
        raise ValueError(f"{path}: missing kind header or column row")
    return ParsedResult(kind=kind, config=config, meta=meta, columns=columns, rows=rows, footers=footers)

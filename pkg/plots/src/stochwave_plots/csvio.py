"""Parser for stochwave result files.

Deliberately self-contained: this package talks to the simulator only
through its documented file format ('# key: value' metadata, a CSV body,
'#footer:' JSON lines).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

FORMAT_HEADER = "# stochwave-result v1"

CONVERGENCE_COLUMNS = ("resolution", "scheme", "ms_error", "stderr")
TRACE_COLUMNS = ("time", "scheme", "mean_H", "stderr_H")


class SchemaError(ValueError):
    pass


@dataclass
class ResultData:
    path: str
    kind: str
    config: dict
    meta: dict
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    footers: list[dict] = field(default_factory=list)

    def schemes(self) -> list[str]:
        seen = []
        for row in self.rows:
            if row[1] not in seen:
                seen.append(row[1])
        return seen

    def series(self, scheme: str):
        """(x, y, err) columns for one scheme, finite y only."""
        xs, ys, es = [], [], []
        for row in self.rows:
            if row[1] == scheme and row[2] == row[2]:  # skip NaN entries
                xs.append(row[0])
                ys.append(row[2])
                es.append(row[3])
        return xs, ys, es

    def footer_for(self, scheme: str) -> dict:
        for footer in self.footers:
            if footer.get("scheme") == scheme:
                return footer
        return {}


def load_result(path) -> ResultData:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != FORMAT_HEADER:
        raise SchemaError(f"{path}: not a stochwave result file")
    kind = None
    config: dict = {}
    meta: dict = {}
    columns = None
    rows: list[tuple] = []
    footers: list[dict] = []
    for line in lines[1:]:
        if line.startswith("#footer:"):
            footers.append(json.loads(line[len("#footer:") :]))
        elif line.startswith("#"):
            key, _, value = line[1:].partition(":")
            key, value = key.strip(), value.strip()
            if key == "kind":
                kind = value
            elif key == "config":
                config = json.loads(value)
            else:
                meta[key] = value
        elif columns is None:
            columns = tuple(line.split(","))
        elif line:
            cells = line.split(",")
            rows.append((float(cells[0]), cells[1]) + tuple(float(c) for c in cells[2:]))
    if kind is None or columns is None:
        raise SchemaError(f"{path}: missing kind header or column row")
    return ResultData(
        path=str(path), kind=kind, config=config, meta=meta, columns=columns, rows=rows, footers=footers
    )


def require_schema(data: ResultData, kind: str, columns: tuple[str, ...]) -> None:
    if data.kind != kind or data.columns != columns:
        raise SchemaError(
            f"{data.path}: expected a {kind!r} file with columns {','.join(columns)}, "
            f"got {data.kind!r} with {','.join(data.columns)}"
        )
    if not data.rows:
        raise SchemaError(f"{data.path}: no data rows")

"""CSV / JSON reading and writing with reproducible formatting.

Floats are written in their shortest round-trip decimal form (``repr``), so
a written matrix reads back bit for bit.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .core import DataError


class CsvFormatError(DataError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


def format_float(v: float) -> str:
    return repr(float(v))


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def read_matrix_csv(path, columns=None) -> np.ndarray:
    """Read a numeric matrix; a leading non-numeric row is taken as a header.

    Raises :class:`CsvFormatError` naming the line for ragged rows,
    non-numeric cells, and NaN / infinite values.
    """
    rows = []
    width = None
    with open(path, newline="") as fh:
        for line_no, raw in enumerate(csv.reader(fh), start=1):
            if not raw or all(not t.strip() for t in raw):
                continue
            tokens = [t.strip() for t in raw]
            if not rows and width is None and not all(_is_number(t) for t in tokens):
                width = len(tokens)  # header row
                continue
            if width is None:
                width = len(tokens)
            if len(tokens) != width:
                raise CsvFormatError(path, line_no, f"expected {width} fields, found {len(tokens)}")
            values = []
            for t in tokens:
                try:
                    v = float(t)
                except ValueError:
                    raise CsvFormatError(path, line_no, f"non-numeric cell {t!r}") from None
                if not math.isfinite(v):
                    raise CsvFormatError(path, line_no, f"non-finite value {t!r}")
                values.append(v)
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no data rows")
    x = np.array(rows, dtype=np.float64)
    if columns is not None:
        cols = list(columns)
        if any(c < 0 or c >= x.shape[1] for c in cols):
            raise DataError(f"{path}: column selection {cols} out of range for {x.shape[1]} columns")
        x = x[:, cols]
    return x


def matrix_header(d: int) -> list:
    return [f"x{j + 1}" for j in range(d)]


def write_table(path, header, rows, fmt: str = "csv") -> None:
    """Write rows as CSV (header line first) or as a JSON list of records."""
    path = Path(path)
    if fmt == "json":
        records = [dict(zip(header, row)) for row in rows]
        write_json(path, records)
        return
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_float(v) if isinstance(v, float) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_matrix_csv(path, x, fmt: str = "csv") -> None:
    x = np.asarray(x, dtype=np.float64)
    write_table(path, matrix_header(x.shape[1]), x.tolist(), fmt)


def write_indices(path, indices, fmt: str = "csv") -> None:
    write_table(path, ["index"], [[int(i)] for i in indices], fmt)


def read_indices(path) -> np.ndarray:
    """Read a one-column index file (CSV with optional header, or JSON)."""
    text = Path(path).read_text()
    if text.lstrip().startswith("["):
        data = json.loads(text)
        return np.array([int(rec["index"]) if isinstance(rec, dict) else int(rec) for rec in data], dtype=np.int64)
    out = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        token = line.strip()
        if not token:
            continue
        if line_no == 1 and not _is_number(token):
            continue
        try:
            value = float(token)
        except ValueError:
            raise CsvFormatError(path, line_no, f"non-numeric index {token!r}") from None
        if value != int(value):
            raise CsvFormatError(path, line_no, f"index {token!r} is not an integer")
        out.append(int(value))
    return np.array(out, dtype=np.int64)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(canonical_json(obj))


def read_json(path):
    return json.loads(Path(path).read_text())


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode()).hexdigest()

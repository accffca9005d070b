"""CSV ingestion and run manifests.

Input files are plain comma-separated numeric matrices, one observation
per row, '.' as the decimal mark.  A header row is detected by a
non-numeric first line (or forced with ``skip_header=True``).  Parse
failures report the offending row and column.
"""

from __future__ import annotations

import dataclasses
import json
import os
import platform
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np
import scipy

from .exceptions import DataFormatError

try:
    from importlib.metadata import version as _pkg_version

    _EDDR_VERSION = _pkg_version("eddr")
except Exception:  # pragma: no cover - not installed
    _EDDR_VERSION = "unknown"


def _parse_row(line: str, row_index: int, path: str) -> list[float]:
    cells = line.split(",")
    values = []
    for col, cell in enumerate(cells):
        text = cell.strip()
        if not text:
            raise DataFormatError(f"{path}: row {row_index + 1}, column {col + 1} is empty")
        try:
            values.append(float(text))
        except ValueError:
            raise DataFormatError(
                f"{path}: row {row_index + 1}, column {col + 1}: not a number: {text!r}"
            ) from None
    return values


def read_matrix_csv(path: str, skip_header: bool | None = None) -> np.ndarray:
    """Read a numeric matrix; returns shape (rows, cols), possibly (0, 0).

    ``skip_header=None`` auto-detects a header by trying to parse the
    first non-empty line as numbers.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n").rstrip("\r") for ln in fh]
    rows_text = [(i, ln) for i, ln in enumerate(lines) if ln.strip()]
    if not rows_text:
        return np.zeros((0, 0))
    start = 0
    if skip_header is True:
        start = 1
    elif skip_header is None:
        try:
            _parse_row(rows_text[0][1], rows_text[0][0], path)
        except DataFormatError:
            start = 1
    rows_text = rows_text[start:]
    if not rows_text:
        return np.zeros((0, 0))
    data = []
    width = None
    for i, ln in rows_text:
        row = _parse_row(ln, i, path)
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DataFormatError(
                f"{path}: row {i + 1} has {len(row)} columns, expected {width}"
            )
        data.append(row)
    matrix = np.array(data, dtype=float)
    if not np.isfinite(matrix).all():
        bad = np.argwhere(~np.isfinite(matrix))[0]
        raise DataFormatError(
            f"{path}: row {int(bad[0]) + 1}, column {int(bad[1]) + 1} is not finite"
        )
    return matrix


def write_text_atomic(path: str, text: str) -> None:
    """Write via a temp file in the same directory, then rename into place."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class RunManifest:
    """Everything needed to reproduce a command's outputs exactly."""

    command: str
    config: dict
    seed: int | None
    outputs: list[str] = field(default_factory=list)
    started: str = ""
    finished: str = ""
    versions: dict = field(
        default_factory=lambda: {
            "eddr": _EDDR_VERSION,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        }
    )

    def mark_started(self) -> None:
        self.started = datetime.now(timezone.utc).isoformat()

    def mark_finished(self) -> None:
        self.finished = datetime.now(timezone.utc).isoformat()

    def write(self, path: str) -> None:
        write_text_atomic(path, json.dumps(dataclasses.asdict(self), indent=2) + "\n")


def format_table_value(x: float) -> str:
    """Six significant digits, the precision used in result tables."""
    return f"{x:.6g}"

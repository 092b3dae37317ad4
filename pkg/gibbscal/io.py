"""Dataset files in, canonical JSON and CSV results out."""

import csv
import json
import logging
import math
import os
import platform
from datetime import datetime, timezone
from hashlib import sha256
from typing import Dict, List

import numpy as np
import scipy

from ._version import __version__
from .data import DataSet
from .exceptions import DataParseError

_LOGGER = logging.getLogger(__name__)

SCHEMA_PATH = os.path.join(os.path.dirname(__file__), "schema", "result.schema.json")


def _plain(obj):
    """Return obj as plain JSON values; numpy types are converted, NaN becomes None."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def dumps_canonical(obj) -> str:
    """Return canonical JSON text: sorted keys, two-space indent, a final newline.

    Floats are written as their shortest round-trip repr (at most 17
    significant digits), so parsing the text gives back the same values.
    """
    text = json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False)
    return text + "\n"


def dumps_line(obj) -> str:
    """Return the canonical JSON of obj on a single line."""
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def payload_digest(payload) -> str:
    """Return the SHA-256 hex digest of the canonical payload text."""
    return sha256(dumps_canonical(payload).encode("utf-8")).hexdigest()


def versions() -> Dict:
    return {
        "gibbscal": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def build_envelope(config: Dict, payload: Dict, seed, started: datetime, elapsed) -> Dict:
    """Return the result envelope around a payload.

    The payload and its digest depend only on the configuration and seed;
    timing and versions are kept beside it.
    """
    return {
        "config": config,
        "payload": payload,
        "payload_sha256": payload_digest(payload),
        "seed": int(seed),
        "timing": {
            "started": started.astimezone(timezone.utc).isoformat(),
            "elapsed_seconds": float(elapsed),
        },
        "versions": versions(),
    }


def write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)


def write_envelope(path, envelope: Dict) -> None:
    _LOGGER.debug("write_envelope(path=%s)...", path)
    write_text(path, dumps_canonical(envelope))


def _csv_cell(value) -> str:
    value = _plain(value)
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    return repr(value) if isinstance(value, float) else str(value)


def write_csv(path, rows: List[Dict]) -> None:
    """Write rows as a CSV table, with the union of their keys as columns."""
    columns = []
    for row in rows:
        columns += [key for key in row if key not in columns]
    _LOGGER.debug("write_csv(path=%s, rows=%s)...", path, len(rows))
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_csv_cell(row.get(key)) for key in columns])


def _parse_cell(path, cell, line_no, col_no) -> float:
    try:
        value = float(cell)
    except ValueError:
        value = math.nan
    if not math.isfinite(value):
        raise DataParseError(
            f"{path}:{line_no}:{col_no}: '{cell}' isn't a finite number",
            line=line_no,
            column=col_no,
        )
    return value


def load_dataset_csv(
    path, split_index=None, header=False, classification=False
) -> DataSet:
    """Return the records of a rectangular numeric CSV file.

    For classification data the column at split_index (by default the last
    one) holds labels, each of which must be -1 or +1.
    """
    _LOGGER.debug("load_dataset_csv(path=%s, header=%s)...", path, header)
    rows, line_numbers = [], []
    width = None
    with open(path, encoding="utf-8", newline="") as handle:
        for line_no, row in enumerate(csv.reader(handle), start=1):
            if header and line_no == 1:
                continue
            if not row or all(not cell.strip() for cell in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DataParseError(
                    f"{path}:{line_no}: expected {width} columns, got {len(row)}",
                    line=line_no,
                )
            rows.append(
                [_parse_cell(path, c, line_no, j) for j, c in enumerate(row, start=1)]
            )
            line_numbers.append(line_no)

    if not rows:
        raise DataParseError(f"{path}: no records")
    if split_index is not None and not 0 <= split_index < width:
        raise DataParseError(f"{path}: split_index={split_index} is outside {width} columns")
    records = np.array(rows, dtype=float)

    if classification:
        label_col = width - 1 if split_index is None else split_index
        labels = records[:, label_col]
        bad = np.flatnonzero((labels != 1.0) & (labels != -1.0))
        if bad.size:
            line_no = line_numbers[int(bad[0])]
            raise DataParseError(
                f"{path}:{line_no}:{label_col + 1}: label {labels[bad[0]]} isn't -1 or +1",
                line=line_no,
                column=label_col + 1,
            )
    return DataSet(records, split_index=split_index)

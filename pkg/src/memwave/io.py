"""CSV and JSON persistence with reproducible formatting.

Floats are written with ``repr`` (shortest round-trip form), so files
are bit-identical across runs and across worker counts, and every
verdict can be recomputed from the persisted values alone.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .dynamics import TrajectoryRecord

__all__ = [
    "write_trajectory",
    "write_checkpoints",
    "write_table",
    "read_table",
    "write_report",
    "read_report",
]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_table(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def write_trajectory(record: TrajectoryRecord, path) -> None:
    """Diagnostics CSV with the documented column order."""
    cols = record.columns()
    rows = zip(*(cols[name] for name in TrajectoryRecord.COLUMNS))
    write_table(path, TrajectoryRecord.COLUMNS, rows)


def write_checkpoints(record: TrajectoryRecord, path) -> None:
    """Sidecar CSV of state snapshots: time, then u and v coefficients."""
    if record.checkpoint_times is None:
        raise ValueError("record carries no checkpoints")
    n = record.checkpoints_u.shape[1]
    header = ["time"] + [f"u{i}" for i in range(1, n + 1)] + [f"v{i}" for i in range(1, n + 1)]
    rows = [
        [t, *u, *v]
        for t, u, v in zip(record.checkpoint_times, record.checkpoints_u, record.checkpoints_v)
    ]
    write_table(path, header, rows)


def write_report(report: dict, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def read_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)

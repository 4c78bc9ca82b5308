"""CSV ingestion, fixed-precision JSON and the on-disk output layout."""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import DataError, ParseError
from .trajectory import RawTrack, Trajectory

logger = logging.getLogger(__name__)

TRACK_COLUMNS = ("traj_id", "t", "x", "y")
LABEL_COLUMNS = ("traj_id", "cluster_id")


def fmt_float(x: float) -> str:
    """17 significant digits, so values round-trip across languages."""
    return format(float(x), ".17g")


def _coerce_ids(raw_ids: Iterable[str]) -> dict:
    raw_ids = list(raw_ids)
    try:
        return {r: int(r) for r in raw_ids}
    except ValueError:
        return {r: r for r in raw_ids}


def _read_rows(path, columns):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in header]
        missing = [c for c in columns if c not in header]
        if missing:
            raise ParseError(1, f"header lacks column(s) {', '.join(missing)}")
        idx = [header.index(c) for c in columns]
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(reader.line_num, f"expected {len(header)} fields, got {len(row)}")
            yield reader.line_num, [row[k].strip() for k in idx]


def ingest_csv(path, dropped: list | None = None) -> list[RawTrack]:
    """Read ``traj_id,t,x,y`` rows into one RawTrack per id, sorted by t.

    Ids that are all integers are returned as ints.  Tracks with a single
    sample are skipped (and recorded in ``dropped`` when given).
    """
    samples = defaultdict(list)
    for line, (tid, t, x, y) in _read_rows(path, TRACK_COLUMNS):
        if not tid:
            raise ParseError(line, "empty traj_id")
        try:
            values = float(t), float(x), float(y)
        except ValueError:
            raise ParseError(line, f"non-numeric value in {(t, x, y)}") from None
        if not all(math.isfinite(v) for v in values):
            raise ParseError(line, "non-finite value")
        samples[tid].append(values)
    if not samples:
        raise DataError(f"{path}: no samples")

    ids = _coerce_ids(samples)
    tracks = []
    for raw_id, rows in samples.items():
        tid = ids[raw_id]
        arr = np.array(sorted(rows, key=lambda r: r[0]))
        if np.any(np.diff(arr[:, 0]) == 0):
            raise DataError(f"duplicate timestamp in track {tid!r}")
        if len(arr) < 2:
            logger.warning("skipping track %r with a single sample", tid)
            if dropped is not None:
                dropped.append({"traj_id": tid, "reason": "single sample"})
            continue
        tracks.append(RawTrack(tid, arr[:, 0], arr[:, 1:]))
    tracks.sort(key=lambda tr: tr.traj_id)
    return tracks


def write_tracks_csv(path, tracks: Iterable[RawTrack | Trajectory]):
    """Write tracks (or resampled trajectories at t = 1..T) as ``traj_id,t,x,y``."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACK_COLUMNS)
        for tr in tracks:
            if isinstance(tr, Trajectory):
                times, xy = np.arange(1, tr.T + 1), tr.positions
            else:
                times, xy = tr.times, tr.xy
            for t, (x, y) in zip(times, xy):
                w.writerow([tr.traj_id, fmt_float(t), fmt_float(x), fmt_float(y)])


def read_labels_csv(path) -> dict:
    rows = []
    for line, (tid, lab) in _read_rows(path, LABEL_COLUMNS):
        try:
            rows.append((tid, int(lab)))
        except ValueError:
            raise ParseError(line, f"cluster_id {lab!r} is not an integer") from None
    if not rows:
        raise DataError(f"{path}: no labels")
    ids = _coerce_ids(r[0] for r in rows)
    out = {}
    for tid, lab in rows:
        if ids[tid] in out:
            raise DataError(f"duplicate label for {ids[tid]!r}")
        out[ids[tid]] = lab
    return out


def write_labels_csv(path, labels: Mapping):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LABEL_COLUMNS)
        for tid in sorted(labels):
            w.writerow([tid, labels[tid]])


def _encode(obj, indent, level) -> str:
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return {None: "null", True: "true", False: "false"}[None if obj is None else bool(obj)]
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return _json_str(obj)
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = ", " if not indent else ","
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        items = [f"{pad}{_json_str(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{" + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{pad}{_encode(v, indent, level + 1)}" for v in obj]
        return "[" + sep.join(items) + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _json_str(s: str) -> str:
    return json.dumps(s, ensure_ascii=False)


def dumps(obj, indent: int | None = 2) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _encode(obj, indent or 0, 0)


def write_json(path, obj, indent: int | None = 2):
    Path(path).write_text(dumps(obj, indent) + "\n", encoding="utf-8")


def write_jsonl(path, rows: Iterable):
    with Path(path).open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(dumps(row, indent=None) + "\n")

"""CSV schemas: per-pore feature table and small helpers for numeric tables.

Reals are written with 6 significant digits so output files are byte-stable.
"""
from __future__ import annotations

import csv
import io
import os
from pathlib import Path

import numpy as np

from .errors import FileUnreadable, UnsupportedFormat
from .filtering import PoreRecord
from .morphology import PoreFeatures

FEATURE_COLUMNS = (
    "image_id",
    "pore_id",
    "centroid_x_px",
    "centroid_y_px",
    "area_px",
    "area_um2",
    "perimeter_um",
    "major_um",
    "minor_um",
    "angle_deg",
    "circularity",
    "aspect_ratio",
    "roundness",
    "solidity",
)


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        s = f"{float(v):.6g}"
        return "0" if s == "-0" else s
    return str(v)


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    tmp.write_text(text)
    os.replace(tmp, path)


def feature_row(r: PoreRecord) -> list:
    f = r.features
    return [
        r.image_id,
        r.pore_id,
        r.centroid_x_px,
        r.centroid_y_px,
        r.area_px,
        f.area,
        f.perimeter,
        f.major,
        f.minor,
        f.angle,
        f.circularity,
        f.aspect_ratio,
        f.roundness,
        f.solidity,
    ]


def features_csv(records) -> str:
    return render_csv(FEATURE_COLUMNS, (feature_row(r) for r in records))


def parse_features_csv(text: str, source: str = "<text>") -> list[PoreRecord]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise UnsupportedFormat(f"{source}: empty feature table") from None
    if tuple(c.strip() for c in header) != FEATURE_COLUMNS:
        raise UnsupportedFormat(f"{source}: unexpected feature table header {header}")
    records = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(FEATURE_COLUMNS):
            raise UnsupportedFormat(f"{source}:{lineno}: expected {len(FEATURE_COLUMNS)} fields")
        try:
            vals = [float(v) for v in row[5:]]
            rec = PoreRecord(
                image_id=row[0],
                pore_id=int(row[1]),
                centroid_x_px=float(row[2]),
                centroid_y_px=float(row[3]),
                area_px=int(row[4]),
                features=PoreFeatures(*vals),
            )
        except ValueError as exc:
            raise UnsupportedFormat(f"{source}:{lineno}: {exc}") from None
        records.append(rec)
    return records


def read_features_csv(path) -> list[PoreRecord]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FileUnreadable(f"{path}: {exc.strerror or exc}") from None
    return parse_features_csv(text, str(path))

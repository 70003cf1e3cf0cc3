"""Pore dataset assembly, lower-area cutoff and expert label join."""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import DuplicateLabel, FileUnreadable, InvalidLabelValue, UnknownPoreId
from .morphology import Pore, PoreFeatures, compute_features

DEFAULT_CUTOFF_UM2 = 0.4


class Label(enum.Enum):
    REAL = "real"
    SHADE = "shade"
    OVERLAP = "overlap"
    UNLABELED = "unlabeled"

    @property
    def is_artifact(self) -> bool:
        return self in (Label.SHADE, Label.OVERLAP)


LABEL_ORDER = (Label.REAL, Label.SHADE, Label.OVERLAP, Label.UNLABELED)


@dataclass(frozen=True)
class PoreRecord:
    image_id: str
    pore_id: int
    features: PoreFeatures
    centroid_x_px: float = 0.0
    centroid_y_px: float = 0.0
    area_px: int = 0
    label: Label = Label.UNLABELED

    @property
    def key(self) -> tuple[str, int]:
        return (self.image_id, self.pore_id)

    @property
    def area(self) -> float:
        return self.features.area


@dataclass(frozen=True)
class PoreDataset:
    records: tuple[PoreRecord, ...]
    cutoff_um2: float = 0.0
    dropped: int = 0
    upper_cutoff_um2: float | None = None

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


def records_from_pores(image_id: str, pores: list[Pore], scale: float) -> list[PoreRecord]:
    return [
        PoreRecord(
            image_id=image_id,
            pore_id=p.id,
            features=compute_features(p, scale),
            centroid_x_px=p.centroid[0],
            centroid_y_px=p.centroid[1],
            area_px=p.pixel_count,
        )
        for p in pores
    ]


def check_unique(records) -> None:
    seen = set()
    for r in records:
        if r.key in seen:
            raise ValueError(f"duplicate pore key {r.key}")
        seen.add(r.key)


def apply_lower_cutoff(records, cutoff: float = DEFAULT_CUTOFF_UM2, upper: float | None = None) -> PoreDataset:
    """Keep records with ``area >= cutoff`` (and ``area <= upper`` when given), in order."""
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    records = tuple(records)
    check_unique(records)
    kept = tuple(
        r for r in records if r.area >= cutoff and (upper is None or r.area <= upper)
    )
    return PoreDataset(kept, cutoff, len(records) - len(kept), upper)


def parse_label(value: str) -> Label:
    v = value.strip().lower()
    for lab in (Label.REAL, Label.SHADE, Label.OVERLAP):
        if v == lab.value:
            return lab
    raise InvalidLabelValue(f"label must be real, shade or overlap, got {value!r}")


def parse_labels(text: str) -> list[tuple[str, int, Label]]:
    """Parse label CSV text with header ``image_id,pore_id,label``."""
    rows = []
    header = None
    for row in csv.reader(io.StringIO(text)):
        if not row or all(not c.strip() for c in row):
            continue
        if header is None:
            header = [c.strip().lower() for c in row]
            if header != ["image_id", "pore_id", "label"]:
                raise InvalidLabelValue(f"label file header must be image_id,pore_id,label, got {row}")
            continue
        if len(row) != 3:
            raise InvalidLabelValue(f"label row must have 3 fields: {row}")
        try:
            pid = int(row[1])
        except ValueError:
            raise UnknownPoreId(f"pore_id {row[1]!r} is not an integer") from None
        rows.append((row[0].strip(), pid, parse_label(row[2])))
    return rows


def read_labels(path) -> list[tuple[str, int, Label]]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FileUnreadable(f"{path}: {exc.strerror or exc}") from None
    return parse_labels(text)


def join_labels(ds: PoreDataset, labels, known_keys=None) -> PoreDataset:
    """Attach expert labels; ``labels`` is a label CSV path or parsed rows.

    ``known_keys`` widens the set of acceptable (image_id, pore_id) pairs, so
    labels for pores removed by the cutoff are accepted and ignored. Any other
    unmatched row raises UnknownPoreId.
    """
    if isinstance(labels, (str, Path)):
        labels = read_labels(labels)
    mapping: dict[tuple[str, int], Label] = {}
    present = {r.key for r in ds.records}
    known = present if known_keys is None else set(known_keys) | present
    for image_id, pore_id, lab in labels:
        key = (image_id, pore_id)
        if key in mapping:
            raise DuplicateLabel(f"pore {image_id},{pore_id} labelled more than once")
        if key not in known:
            raise UnknownPoreId(f"no pore {pore_id} in image {image_id!r}")
        mapping[key] = lab
    records = tuple(
        replace(r, label=mapping[r.key]) if r.key in mapping else replace(r, label=Label.UNLABELED)
        for r in ds.records
    )
    return replace(ds, records=records)

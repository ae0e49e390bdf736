"""Dataset manifests: JSON-lines triplet records.

One JSON object per line. Required fields: id, source_person, garment_ref,
mask, densepose. Optional: ground_truth (needed for paired evaluation) and
undergarment_ref (a bundled flat neutral reference is used when absent).
Relative paths resolve against the manifest file's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import DomainError, ManifestError

REQUIRED_FIELDS = ("id", "source_person", "garment_ref", "mask", "densepose")
OPTIONAL_FIELDS = ("ground_truth", "undergarment_ref")


@dataclass(frozen=True)
class TripletRecord:
    id: str
    source_person: Path
    garment_ref: Path
    mask: Path
    densepose: Path
    ground_truth: Path | None = None
    undergarment_ref: Path | None = None


def _parse_record(obj: dict, line_no: int, base: Path) -> TripletRecord:
    unknown = set(obj) - set(REQUIRED_FIELDS) - set(OPTIONAL_FIELDS)
    if unknown:
        raise ManifestError(f"unknown fields {sorted(unknown)}", line_no)
    for field in REQUIRED_FIELDS:
        if field not in obj:
            raise ManifestError(f"missing required field {field!r}", line_no)
    for field in (*REQUIRED_FIELDS, *OPTIONAL_FIELDS):
        value = obj.get(field)
        if value is not None and not isinstance(value, str):
            raise ManifestError(f"field {field!r} must be a string", line_no)
    if not obj["id"]:
        raise ManifestError("field 'id' must be nonempty", line_no)

    def path_of(field: str) -> Path | None:
        value = obj.get(field)
        return base / value if value is not None else None

    return TripletRecord(
        id=obj["id"],
        source_person=path_of("source_person"),
        garment_ref=path_of("garment_ref"),
        mask=path_of("mask"),
        densepose=path_of("densepose"),
        ground_truth=path_of("ground_truth"),
        undergarment_ref=path_of("undergarment_ref"),
    )


def load_manifest(path: str | Path) -> list[TripletRecord]:
    """Parse and validate a manifest; file existence is checked at run time."""
    path = Path(path)
    base = path.parent
    records: list[TripletRecord] = []
    seen: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"invalid JSON: {exc.msg}", line_no) from exc
            if not isinstance(obj, dict):
                raise ManifestError("record must be a JSON object", line_no)
            record = _parse_record(obj, line_no, base)
            if record.id in seen:
                raise ManifestError(
                    f"duplicate id {record.id!r} (first seen on line {seen[record.id]})",
                    line_no,
                )
            seen[record.id] = line_no
            records.append(record)
    if not records:
        raise DomainError(f"{path}: manifest contains no records")
    return records

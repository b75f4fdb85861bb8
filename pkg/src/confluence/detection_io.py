"""Reading and writing detection dumps and ground-truth annotations.

Detections travel as a JSON array of ``{image_id, category_id,
bbox: [x, y, width, height], score}`` records.  Ground truth uses the
usual annotation layout with ``images`` / ``annotations`` / ``categories``
arrays.  A flat CSV form of the detection records (header
``image_id,category_id,x,y,w,h,score``) is accepted behind a flag for
hand-written fixtures.

Ingestion converts ``[x, y, w, h]`` to corner form ``(x, y, x + w, y + h)``
with no other arithmetic, drops records whose score falls below the
configured floor, and groups the survivors by image.  Writing reverses the
corner conversion and emits records in a deterministic order so equal
results always serialize to identical bytes.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from typing import IO, Iterator, Mapping, Union

from .geometry import BoxCorners
from .suppression import Detection, SuppressionResult

__all__ = [
    "AnnotationError",
    "GroundTruth",
    "LoadedDetections",
    "ParseError",
    "RecordError",
    "load_detections",
    "load_ground_truth",
    "write_detections",
]

Source = Union[str, os.PathLike, IO[str]]

CSV_HEADER = ["image_id", "category_id", "x", "y", "w", "h", "score"]


class ParseError(ValueError):
    """A file is not well-formed (bad JSON, bad CSV structure)."""

    def __init__(self, message: str, byte_offset: int | None = None):
        super().__init__(message)
        self.byte_offset = byte_offset


class RecordError(ValueError):
    """A single record violates the format invariants (strict mode)."""

    def __init__(self, message: str, index: int):
        super().__init__(message)
        self.index = index


class AnnotationError(ValueError):
    """An annotation file fails referential or field validation."""


@dataclass(frozen=True)
class LoadedDetections:
    """Detections grouped by image plus ingestion counters.

    ``by_image`` maps image_id to detections ordered by (class_id,
    stable_id); stable ids are assigned to kept records in file order.
    ``total`` always equals kept + dropped_invalid + dropped_below_floor.
    """

    by_image: dict[int, list[Detection]]
    dropped_invalid: int
    dropped_below_floor: int
    total: int

    @property
    def kept(self) -> int:
        return sum(len(v) for v in self.by_image.values())


@dataclass(frozen=True)
class GroundTruth:
    """Ground-truth boxes grouped by image plus the category table."""

    by_image: dict[int, list["GroundTruthBox"]]  # noqa: F821 (import cycle)
    categories: dict[int, str]


def _read_text(source: Source) -> str:
    if hasattr(source, "read"):
        return source.read()
    with open(os.fspath(source), "r", encoding="utf-8") as fh:
        return fh.read()


def _is_int(value) -> bool:
    return type(value) is int


def _is_real(value) -> bool:
    if type(value) is bool:
        return False
    if isinstance(value, int):
        return True
    return isinstance(value, float) and value == value and abs(value) != float("inf")


def _record_fault(record) -> str | None:
    """Return a reason string when a raw detection record is unusable."""
    if not isinstance(record, dict):
        return "record is not an object"
    for key in ("image_id", "category_id", "bbox", "score"):
        if key not in record:
            return f"missing field {key!r}"
    if not _is_int(record["image_id"]):
        return "image_id is not an integer"
    if not _is_int(record["category_id"]):
        return "category_id is not an integer"
    bbox = record["bbox"]
    if not isinstance(bbox, (list, tuple)) or len(bbox) != 4:
        return "bbox is not a list of four numbers"
    if not all(_is_real(v) for v in bbox):
        return "bbox contains a non-numeric value"
    if not _is_real(record["score"]):
        return "score is not a number"
    _, _, w, h = bbox
    if not (w > 0 and h > 0):
        return f"degenerate box (w={w}, h={h})"
    score = record["score"]
    if not (0.0 < score <= 1.0):
        return f"score {score} outside (0, 1]"
    return None


def _parse_json_records(text: str) -> list:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise ParseError(
            f"malformed JSON at byte {offset}: {exc.msg}", byte_offset=offset
        ) from exc
    if not isinstance(data, list):
        raise ParseError("detection file must be a JSON array of records")
    return data


def _parse_csv_records(text: str) -> list:
    rows = list(csv.reader(text.splitlines()))
    if not rows or rows[0] != CSV_HEADER:
        raise ParseError(
            "CSV detections must start with header "
            + ",".join(CSV_HEADER)
        )
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 7:
            raise ParseError(f"line {lineno}: expected 7 fields, got {len(row)}")
        try:
            records.append(
                {
                    "image_id": int(row[0]),
                    "category_id": int(row[1]),
                    "bbox": [float(v) for v in row[2:6]],
                    "score": float(row[6]),
                }
            )
        except ValueError:
            # Let the shared invariant checks report it per strictness.
            records.append({"_bad_line": lineno})
    return records


def load_detections(
    source: Source,
    *,
    strict: bool = False,
    score_floor: float = 0.01,
    csv_format: bool = False,
) -> LoadedDetections:
    """Load a detection file and group records by image.

    Records with ``score < score_floor`` are dropped and counted.  Records
    violating the format invariants (missing fields, degenerate boxes,
    scores outside (0, 1]) raise :class:`RecordError` when ``strict`` is
    true and are otherwise dropped and counted.  Malformed JSON raises
    :class:`ParseError` carrying the byte offset of the failure.
    """
    text = _read_text(source)
    raw = _parse_csv_records(text) if csv_format else _parse_json_records(text)

    grouped: dict[int, list[Detection]] = {}
    dropped_invalid = 0
    dropped_floor = 0
    next_id = 0
    for index, record in enumerate(raw):
        if isinstance(record, dict) and "_bad_line" in record:
            fault = f"line {record['_bad_line']}: non-numeric field"
        else:
            fault = _record_fault(record)
        if fault is not None:
            if strict:
                raise RecordError(f"record {index}: {fault}", index=index)
            dropped_invalid += 1
            continue
        if record["score"] < score_floor:
            dropped_floor += 1
            continue
        x, y, w, h = record["bbox"]
        try:
            det = Detection(
                box=BoxCorners.from_xyxy(x, y, x + w, y + h),
                score=float(record["score"]),
                class_id=record["category_id"],
                stable_id=next_id,
                image_id=record["image_id"],
            )
        except ValueError as exc:
            if strict:
                raise RecordError(f"record {index}: {exc}", index=index) from exc
            dropped_invalid += 1
            continue
        next_id += 1
        grouped.setdefault(det.image_id, []).append(det)

    by_image = {
        img: sorted(dets, key=lambda d: (d.class_id, d.stable_id))
        for img, dets in sorted(grouped.items())
    }
    return LoadedDetections(
        by_image=by_image,
        dropped_invalid=dropped_invalid,
        dropped_below_floor=dropped_floor,
        total=len(raw),
    )


def _result_records(
    results: Mapping[int, SuppressionResult],
) -> Iterator[tuple[tuple, dict]]:
    for image_id in results:
        for det, final_score in results[image_id].kept:
            x1, y1, x2, y2 = det.box.as_xyxy()
            key = (image_id, det.class_id, -final_score, det.stable_id)
            yield key, {
                "image_id": image_id,
                "category_id": det.class_id,
                "bbox": [x1, y1, x2 - x1, y2 - y1],
                "score": final_score,
            }


def write_detections(results: Mapping[int, SuppressionResult], dest: Source) -> None:
    """Write per-image suppression results as a detection JSON array.

    Record order is deterministic: (image_id, class_id, descending score,
    stable_id).  Floats are serialized with full shortest-round-trip
    precision, so loading the file back reproduces the kept records
    exactly.
    """
    records = [rec for _, rec in sorted(_result_records(results), key=lambda p: p[0])]
    payload = json.dumps(records, indent=1)
    if hasattr(dest, "write"):
        dest.write(payload)
        return
    path = os.fspath(dest)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(payload)
    except OSError as exc:
        raise OSError(f"cannot write detections to {path!r}: {exc}") from exc


def load_ground_truth(source: Source) -> GroundTruth:
    """Load an annotation file into per-image ground-truth lists.

    ``iscrowd=1`` maps to ``ignore=True``; a missing ``area`` falls back
    to ``w * h``.  Every annotation must reference a listed image, else
    :class:`AnnotationError` names the offending annotation id.  Unknown
    fields are ignored.
    """
    from .evaluation import GroundTruthBox

    text = _read_text(source)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise ParseError(
            f"malformed JSON at byte {offset}: {exc.msg}", byte_offset=offset
        ) from exc
    if not isinstance(data, dict):
        raise ParseError("annotation file must be a JSON object")

    images = data.get("images", [])
    annotations = data.get("annotations", [])
    categories = data.get("categories", [])

    by_image: dict[int, list[GroundTruthBox]] = {}
    for entry in images:
        if not isinstance(entry, dict) or not _is_int(entry.get("id")):
            raise AnnotationError("images entries must carry an integer id")
        by_image[entry["id"]] = []

    for ann in annotations:
        if not isinstance(ann, dict):
            raise AnnotationError("annotations entries must be objects")
        ann_id = ann.get("id", "<missing id>")
        image_id = ann.get("image_id")
        if image_id not in by_image:
            raise AnnotationError(
                f"annotation {ann_id} references unknown image {image_id}"
            )
        bbox = ann.get("bbox")
        if (
            not isinstance(bbox, (list, tuple))
            or len(bbox) != 4
            or not all(_is_real(v) for v in bbox)
        ):
            raise AnnotationError(f"annotation {ann_id} has a malformed bbox")
        iscrowd = ann.get("iscrowd", 0)
        if iscrowd not in (0, 1):
            raise AnnotationError(
                f"annotation {ann_id} has iscrowd={iscrowd!r}, expected 0 or 1"
            )
        x, y, w, h = bbox
        area = ann.get("area")
        if area is None:
            area = w * h
        elif not _is_real(area):
            raise AnnotationError(f"annotation {ann_id} has a non-numeric area")
        category = ann.get("category_id")
        if not _is_int(category):
            raise AnnotationError(f"annotation {ann_id} is missing category_id")
        try:
            box = BoxCorners.from_xyxy(x, y, x + w, y + h)
        except ValueError as exc:
            raise AnnotationError(f"annotation {ann_id}: {exc}") from exc
        by_image[image_id].append(
            GroundTruthBox(
                box=box,
                class_id=category,
                image_id=image_id,
                ignore=bool(iscrowd),
                area=float(area),
            )
        )

    table: dict[int, str] = {}
    for cat in categories:
        if isinstance(cat, dict) and _is_int(cat.get("id")):
            table[cat["id"]] = str(cat.get("name", cat["id"]))
    return GroundTruth(by_image=by_image, categories=table)

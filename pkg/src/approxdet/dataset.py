"""Detection/ground-truth dataset files.

The on-disk format is line-delimited JSON, one record per image/frame:

    {"image_id": "frame_000", "width": 640, "height": 480,
     "objects": [{"class": "car", "box": [x1, y1, x2, y2],
                  "confidence": 0.93}, ...]}

Boxes are in pixel coordinates within the image bounds; ``confidence``
is optional and absent for labelled ground truth. Confidences round-trip
at full precision so downstream thresholds are reproducible bit-exactly.
Record order in the file is the frame order for video streams.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import DataError
from .metrics import BoundingBox, Detection, GroundTruthObject


@dataclass
class ObjectRecord:
    class_id: str
    box: tuple  # (x1, y1, x2, y2) pixels
    confidence: float | None = None


@dataclass
class ImageRecord:
    image_id: str
    width: float
    height: float
    objects: list = field(default_factory=list)


def _parse_object(entry, where: str) -> ObjectRecord:
    if not isinstance(entry, dict):
        raise DataError(f"{where}: object entry must be a mapping")
    try:
        class_id = entry["class"]
        box = entry["box"]
    except KeyError as exc:
        raise DataError(f"{where}: object missing field {exc}") from exc
    if not isinstance(class_id, str) or not class_id:
        raise DataError(f"{where}: class must be a non-empty string")
    if not (isinstance(box, list) and len(box) == 4):
        raise DataError(f"{where}: box must be [x1, y1, x2, y2]")
    x1, y1, x2, y2 = (float(v) for v in box)
    if x1 > x2 or y1 > y2:
        raise DataError(f"{where}: box corners out of order")
    confidence = entry.get("confidence")
    if confidence is not None:
        confidence = float(confidence)
        if not 0.0 <= confidence <= 1.0:
            raise DataError(f"{where}: confidence {confidence} outside [0, 1]")
    return ObjectRecord(class_id, (x1, y1, x2, y2), confidence)


def _parse_record(raw, where: str) -> ImageRecord:
    if not isinstance(raw, dict):
        raise DataError(f"{where}: record must be a JSON object")
    for key in ("image_id", "width", "height"):
        if key not in raw:
            raise DataError(f"{where}: missing field {key!r}")
    width = float(raw["width"])
    height = float(raw["height"])
    if width <= 0 or height <= 0:
        raise DataError(f"{where}: image dimensions must be positive")
    record = ImageRecord(str(raw["image_id"]), width, height)
    for k, entry in enumerate(raw.get("objects", [])):
        obj = _parse_object(entry, f"{where} object {k}")
        x1, y1, x2, y2 = obj.box
        if x1 < 0 or y1 < 0 or x2 > width or y2 > height:
            raise DataError(f"{where} object {k}: box outside image bounds")
        record.objects.append(obj)
    return record


def load_records(path) -> list:
    """Parse and validate a dataset file."""
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            records.append(_parse_record(raw, f"{path}:{lineno}"))
    return records


def save_records(records, path) -> None:
    with open(path, "w") as fh:
        for record in records:
            objects = []
            for obj in record.objects:
                entry = {"class": obj.class_id, "box": list(obj.box)}
                if obj.confidence is not None:
                    entry["confidence"] = obj.confidence
                objects.append(entry)
            fh.write(
                json.dumps(
                    {
                        "image_id": record.image_id,
                        "width": record.width,
                        "height": record.height,
                        "objects": objects,
                    }
                )
                + "\n"
            )


def has_confidences(records) -> bool:
    """True when every object carries a confidence (a detection stream)."""
    objects = [obj for record in records for obj in record.objects]
    return bool(objects) and all(obj.confidence is not None for obj in objects)


def _normalized_box(obj: ObjectRecord, record: ImageRecord) -> BoundingBox:
    x1, y1, x2, y2 = obj.box
    return BoundingBox(
        x1 / record.width, y1 / record.height, x2 / record.width, y2 / record.height
    )


def records_to_detections(records) -> list:
    """Detection stream with frame ids in record order."""
    detections = []
    for frame_id, record in enumerate(records):
        for k, obj in enumerate(record.objects):
            if obj.confidence is None:
                raise DataError(
                    f"record {record.image_id} object {k} has no confidence; "
                    "not a detection stream"
                )
            detections.append(
                Detection(
                    obj.class_id,
                    obj.confidence,
                    _normalized_box(obj, record),
                    frame_id=frame_id,
                )
            )
    return detections


def records_to_ground_truths(records, conf_threshold: float | None = None) -> list:
    """Reference objects with frame ids in record order.

    When the reference is a detection stream, ``conf_threshold`` drops
    objects below the operating threshold; their confidences are kept on
    the ground-truth objects for FN analyses.
    """
    gts = []
    for frame_id, record in enumerate(records):
        for obj in record.objects:
            if (
                conf_threshold is not None
                and obj.confidence is not None
                and obj.confidence < conf_threshold
            ):
                continue
            gts.append(
                GroundTruthObject(
                    obj.class_id,
                    _normalized_box(obj, record),
                    frame_id=frame_id,
                    confidence=obj.confidence,
                )
            )
    return gts


def convert_coco(coco: dict) -> list:
    """Convert a COCO-style annotation dict into image records.

    Supports the common subset: ``images`` (id, width, height,
    file_name), ``annotations`` (image_id, category_id, bbox as
    [x, y, w, h], optional score), ``categories`` (id, name).
    """
    try:
        categories = {c["id"]: c["name"] for c in coco["categories"]}
        images = {im["id"]: im for im in coco["images"]}
    except (KeyError, TypeError) as exc:
        raise DataError(f"not a COCO annotation dict: {exc}") from exc
    records = {
        im_id: ImageRecord(
            str(im.get("file_name", im_id)), float(im["width"]), float(im["height"])
        )
        for im_id, im in images.items()
    }
    for ann in coco.get("annotations", []):
        im_id = ann["image_id"]
        if im_id not in records:
            raise DataError(f"annotation references unknown image {im_id}")
        x, y, w, h = (float(v) for v in ann["bbox"])
        record = records[im_id]
        box = (
            max(0.0, x),
            max(0.0, y),
            min(record.width, x + w),
            min(record.height, y + h),
        )
        records[im_id].objects.append(
            ObjectRecord(
                categories.get(ann["category_id"], str(ann["category_id"])),
                box,
                float(ann["score"]) if "score" in ann else None,
            )
        )
    return [records[k] for k in sorted(records)]

"""COCO annotation and detection file I/O.

COCO boxes are corner-origin ``[x, y, w, h]``; they are converted to
center-size :class:`BoundingBox` once, here, and back on output.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .geometry import BoundingBox, InvalidBoxError
from .nms import Detection
from .report import dumps_json, round_sig


class AnnotationError(ValueError):
    """A malformed or inconsistent annotation/detection file."""


@dataclass
class AnnotatedImage:
    image_id: int
    width: int
    height: int
    gts: list = field(default_factory=list)  # [(BoundingBox, category_id)]

    @property
    def boxes(self) -> list[BoundingBox]:
        return [b for b, _ in self.gts]


def _read_json(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise AnnotationError(f"{path}: malformed JSON ({exc})") from exc


def _require(record: dict, keys, where: str):
    if not isinstance(record, dict):
        raise AnnotationError(f"{where}: expected an object, got {type(record).__name__}")
    missing = [k for k in keys if k not in record]
    if missing:
        raise AnnotationError(f"{where}: missing required key(s) {missing}")


def _bbox(raw, where: str) -> BoundingBox:
    if not isinstance(raw, (list, tuple)) or len(raw) != 4:
        raise AnnotationError(f"{where}: bbox must be a list of 4 numbers, got {raw!r}")
    try:
        return BoundingBox.from_xywh(*(float(v) for v in raw))
    except (TypeError, ValueError) as exc:
        raise AnnotationError(f"{where}: {exc}") from exc


def _clip(box: BoundingBox, width: int, height: int, where: str) -> BoundingBox:
    x1, y1, x2, y2 = box.to_corners()
    x1, x2 = max(0.0, x1), min(float(width), x2)
    y1, y2 = max(0.0, y1), min(float(height), y2)
    try:
        return BoundingBox.from_corners(x1, y1, x2, y2)
    except InvalidBoxError as exc:
        raise AnnotationError(f"{where}: box lies outside the image after clipping") from exc


def load_coco(path, clip: bool = False) -> list[AnnotatedImage]:
    """Read a COCO annotation file into per-image gt lists (file order)."""
    data = _read_json(path)
    _require(data, ("images", "annotations"), str(path))

    images: dict[int, AnnotatedImage] = {}
    for i, img in enumerate(data["images"]):
        where = f"{path}: images[{i}]"
        _require(img, ("id", "width", "height"), where)
        if img["width"] <= 0 or img["height"] <= 0:
            raise AnnotationError(f"{where}: nonpositive image size")
        if img["id"] in images:
            raise AnnotationError(f"{where}: duplicate image id {img['id']}")
        images[img["id"]] = AnnotatedImage(img["id"], int(img["width"]), int(img["height"]))

    for i, ann in enumerate(data["annotations"]):
        where = f"{path}: annotations[{i}] (id={ann.get('id') if isinstance(ann, dict) else None})"
        _require(ann, ("image_id", "bbox", "category_id"), where)
        image = images.get(ann["image_id"])
        if image is None:
            raise AnnotationError(f"{where}: unknown image_id {ann['image_id']}")
        box = _bbox(ann["bbox"], where)
        if clip:
            box = _clip(box, image.width, image.height, where)
        image.gts.append((box, ann["category_id"]))
    return list(images.values())


def coco_dict(images: list[AnnotatedImage], categories: list[dict] | None = None) -> dict:
    ann_id = 1
    annotations = []
    for img in images:
        for box, cat in img.gts:
            annotations.append(
                {
                    "id": ann_id,
                    "image_id": img.image_id,
                    "category_id": cat,
                    "bbox": [round_sig(v) for v in box.to_xywh()],
                    "area": round_sig(box.area),
                    "iscrowd": 0,
                }
            )
            ann_id += 1
    if categories is None:
        cats = sorted({cat for img in images for _, cat in img.gts})
        categories = [{"id": c, "name": str(c)} for c in cats]
    return {
        "images": [{"id": i.image_id, "width": i.width, "height": i.height} for i in images],
        "annotations": annotations,
        "categories": categories,
    }


def dumps_coco(images: list[AnnotatedImage], categories: list[dict] | None = None) -> str:
    return dumps_json(coco_dict(images, categories))


def save_coco(path, images: list[AnnotatedImage], categories: list[dict] | None = None) -> None:
    Path(path).write_text(dumps_coco(images, categories))


def load_detections(path) -> list[tuple[int, Detection]]:
    """Read ``[{bbox: [cx, cy, w, h], score, category_id, image_id}, ...]``.

    Detection boxes are center-size, unlike COCO annotation boxes.
    """
    data = _read_json(path)
    if not isinstance(data, list):
        raise AnnotationError(f"{path}: expected a JSON list of detections")
    out = []
    for i, rec in enumerate(data):
        where = f"{path}: detections[{i}]"
        _require(rec, ("bbox", "score", "category_id", "image_id"), where)
        raw = rec["bbox"]
        if not isinstance(raw, (list, tuple)) or len(raw) != 4:
            raise AnnotationError(f"{where}: bbox must be [cx, cy, w, h], got {raw!r}")
        try:
            det = Detection(BoundingBox(*(float(v) for v in raw)), float(rec["score"]), int(rec["category_id"]))
        except (TypeError, ValueError) as exc:
            raise AnnotationError(f"{where}: {exc}") from exc
        out.append((rec["image_id"], det))
    return out


def dumps_detections(records: list[tuple[int, Detection]]) -> str:
    data = [
        {
            "bbox": [d.box.cx, d.box.cy, d.box.w, d.box.h],
            "score": d.score,
            "category_id": d.category,
            "image_id": image_id,
        }
        for image_id, d in records
    ]
    return dumps_json(data)

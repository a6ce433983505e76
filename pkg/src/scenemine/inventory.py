"""Object inventory: detection filtering, size bucketing, canonical rendering.

Detector hits arrive as JSONL. We keep everything above a low recall-biased
confidence floor (strict inequality), annotate each hit with its relative
box size as a proximity proxy, map raw labels onto the shipped taxonomy,
and render one stable text block per frame for prompt injection.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping, Sequence

logger = logging.getLogger(__name__)

DEFAULT_TAU_RECALL = 0.15

LARGE_THRESHOLD = 0.1
SMALL_THRESHOLD = 0.01

CAMERAS = ("FRONT_LEFT", "FRONT_CENTER", "FRONT_RIGHT")

# Rendered header per camera, in fixed left-to-right order.
CAMERA_LABELS = {
    "FRONT_LEFT": "CAM_FRONT_LEFT",
    "FRONT_CENTER": "CAM_FRONT",
    "FRONT_RIGHT": "CAM_FRONT_RIGHT",
}

EMPTY_RENDER = "[NO DETECTIONS]"


def _load_taxonomy() -> frozenset[str]:
    text = resources.files("scenemine.data").joinpath("taxonomy.txt").read_text()
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


def _load_synonyms() -> dict[str, str]:
    text = resources.files("scenemine.data").joinpath("synonyms.tsv").read_text()
    table: dict[str, str] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        raw, canonical = line.split("\t")
        table[raw.strip()] = canonical.strip()
    return table


TAXONOMY: frozenset[str] = _load_taxonomy()
SYNONYMS: dict[str, str] = _load_synonyms()


@dataclass(frozen=True)
class Box:
    x: float
    y: float
    w: float
    h: float


@dataclass(frozen=True)
class Detection:
    frame_id: str
    camera: str
    class_name: str
    confidence: float
    box: Box
    image_w: int
    image_h: int

    def __post_init__(self):
        if self.camera not in CAMERAS:
            raise ValueError(f"unknown camera {self.camera!r}")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if self.box.w <= 0 or self.box.h <= 0:
            raise ValueError("box must have positive width and height")
        if self.image_w <= 0 or self.image_h <= 0:
            raise ValueError("image dimensions must be positive")


@dataclass(frozen=True)
class InventoryEntry:
    detection: Detection
    mapped_class: str
    mapped: bool
    s_rel: float
    size_bucket: str


@dataclass(frozen=True)
class ObjectInventory:
    frame_id: str
    entries: tuple[InventoryEntry, ...]
    rendered_text: str
    tau_recall: float

    def mapped_classes(self) -> frozenset[str]:
        """Taxonomy classes present in the inventory; grounding evidence."""
        return frozenset(e.mapped_class for e in self.entries if e.mapped)


def compute_relative_size(box: Box, image_w: int, image_h: int) -> float:
    """Box area over image area; rejects non-positive dimensions."""
    if box.w <= 0 or box.h <= 0 or image_w <= 0 or image_h <= 0:
        raise ValueError("dimensions must be positive")
    return (box.w * box.h) / (image_w * image_h)


def bucket_size(s_rel: float) -> str:
    # Large requires strict > 0.1; exactly 0.1 is Med.
    if s_rel > LARGE_THRESHOLD:
        return "Large"
    if s_rel < SMALL_THRESHOLD:
        return "Small"
    return "Med"


def filter_detections(
    detections: Sequence[Detection], tau_recall: float = DEFAULT_TAU_RECALL
) -> list[Detection]:
    """Keep detections with confidence strictly above the floor, in order."""
    if not (0.0 <= tau_recall < 1.0):
        raise ValueError(f"tau_recall {tau_recall} outside [0, 1)")
    return [d for d in detections if d.confidence > tau_recall]


def normalize_label(raw_label: str) -> str:
    return " ".join(raw_label.lower().split())


def map_class_to_taxonomy(raw_label: str) -> tuple[str, bool]:
    """(label, mapped); unmapped labels keep their normalized form, flagged."""
    label = normalize_label(raw_label)
    if label in TAXONOMY:
        return label, True
    if label in SYNONYMS:
        return SYNONYMS[label], True
    return label, False


def build_inventory(
    frame_id: str,
    detections: Sequence[Detection],
    tau_recall: float = DEFAULT_TAU_RECALL,
) -> ObjectInventory:
    entries = []
    for det in filter_detections(detections, tau_recall):
        mapped_class, mapped = map_class_to_taxonomy(det.class_name)
        if not mapped:
            logger.warning(
                "frame %s: unmapped detector label %r kept for display only",
                frame_id,
                det.class_name,
            )
        s_rel = compute_relative_size(det.box, det.image_w, det.image_h)
        entries.append(
            InventoryEntry(
                detection=det,
                mapped_class=mapped_class,
                mapped=mapped,
                s_rel=s_rel,
                size_bucket=bucket_size(s_rel),
            )
        )
    return ObjectInventory(
        frame_id=frame_id,
        entries=tuple(entries),
        rendered_text=_render_entries(tuple(entries)),
        tau_recall=tau_recall,
    )


def _display_name(mapped_class: str, mapped: bool, count: int) -> str:
    name = " ".join(w.capitalize() for w in mapped_class.split())
    if count > 1 and not name.endswith("s"):
        name += "s"
    if not mapped:
        name += "(?)"
    return name


def render_inventory(inventory: ObjectInventory) -> str:
    """Canonical text block: one line per non-empty camera, fixed order.

    Within a camera, identical classes group as "N Name (Bucket/conf, ...)"
    with instances sorted by descending confidence; groups are ordered by
    (max confidence desc, class name asc) and joined with "; ".
    """
    return _render_entries(inventory.entries)


def _render_entries(entries: tuple[InventoryEntry, ...]) -> str:
    if not entries:
        return EMPTY_RENDER
    lines = []
    for camera in CAMERAS:
        cam_entries = [e for e in entries if e.detection.camera == camera]
        if not cam_entries:
            continue
        groups: dict[tuple[str, bool], list[InventoryEntry]] = {}
        for entry in cam_entries:
            groups.setdefault((entry.mapped_class, entry.mapped), []).append(entry)
        ordered = sorted(
            groups.items(),
            key=lambda kv: (-max(e.detection.confidence for e in kv[1]), kv[0][0]),
        )
        parts = []
        for (mapped_class, mapped), members in ordered:
            by_conf = sorted(members, key=lambda m: -m.detection.confidence)
            pairs = ", ".join(f"{m.size_bucket}/{m.detection.confidence:.2f}" for m in by_conf)
            name = _display_name(mapped_class, mapped, len(members))
            parts.append(f"{len(members)} {name} ({pairs})")
        lines.append(f"[{CAMERA_LABELS[camera]}]: " + "; ".join(parts))
    return "\n".join(lines) if lines else EMPTY_RENDER


def detection_from_payload(payload: Mapping) -> Detection:
    box = payload["box"]
    return Detection(
        frame_id=str(payload["frame_id"]),
        camera=str(payload["camera"]),
        class_name=str(payload["class_name"]),
        confidence=float(payload["confidence"]),
        box=Box(x=float(box["x"]), y=float(box["y"]), w=float(box["w"]), h=float(box["h"])),
        image_w=int(payload["image_w"]),
        image_h=int(payload["image_h"]),
    )


def detection_to_payload(det: Detection) -> dict:
    return {
        "frame_id": det.frame_id,
        "camera": det.camera,
        "class_name": det.class_name,
        "confidence": det.confidence,
        "box": {"x": det.box.x, "y": det.box.y, "w": det.box.w, "h": det.box.h},
        "image_w": det.image_w,
        "image_h": det.image_h,
    }


def load_detections(path) -> dict[str, list[Detection]]:
    """Detections JSONL grouped by frame_id; malformed lines are logged."""
    by_frame: dict[str, list[Detection]] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                det = detection_from_payload(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                logger.warning("%s:%d skipped malformed detection: %s", path, lineno, exc)
                continue
            by_frame.setdefault(det.frame_id, []).append(det)
    return by_frame


def iter_detections(rows: Iterable[Mapping]) -> list[Detection]:
    return [detection_from_payload(row) for row in rows]

"""Annotation, ground-truth and frame ingestion.

Annotations and ground truth are JSON documents; frames are image sequences
stored one directory per video (``frame_000000.png`` ...).
"""
from __future__ import annotations

import json
import logging
import math
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from .errors import ValidationError

log = logging.getLogger(__name__)

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
FRAME_PATTERN = re.compile(r"^frame_(\d+)\.(png|pgm)$", re.IGNORECASE)


@dataclass(frozen=True)
class BoundingBox:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if self.x2 < self.x1 or self.y2 < self.y1:
            raise ValidationError(f"degenerate bbox {self.as_list()}: need x2 >= x1 and y2 >= y1")

    @property
    def width(self) -> float:
        return abs(self.x2 - self.x1)

    @property
    def height(self) -> float:
        return abs(self.y2 - self.y1)

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)

    def as_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]


@dataclass(frozen=True)
class Detection:
    frame_index: int
    track_id: str
    bbox: BoundingBox


@dataclass(frozen=True)
class FrameAnnotations:
    frame_index: int
    detections: tuple[Detection, ...] = ()


@dataclass(frozen=True)
class VideoAnnotations:
    video_id: str
    width: int
    height: int
    frames: tuple[FrameAnnotations, ...]

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    def detections(self) -> Iterable[Detection]:
        for frame in self.frames:
            yield from frame.detections


@dataclass(frozen=True)
class Tracklet:
    track_id: str
    detections: tuple[Detection, ...]

    def __post_init__(self):
        if not self.detections:
            raise ValidationError(f"tracklet {self.track_id!r} is empty")
        idx = [d.frame_index for d in self.detections]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValidationError(f"tracklet {self.track_id!r}: frame indices not strictly increasing")

    def __len__(self) -> int:
        return len(self.detections)


@dataclass(frozen=True)
class GroundTruth:
    """Per-frame reaction labels, hazard track sets and hazard class sets."""

    video_id: str
    reaction: tuple[bool, ...]
    hazards: tuple[frozenset[str], ...]
    classes: tuple[frozenset[str], ...]

    @property
    def n_frames(self) -> int:
        return len(self.reaction)


@dataclass(frozen=True)
class FrameStore:
    """Maps frame indices of one video to image files on disk."""

    video_id: str
    paths: dict[int, Path] = field(default_factory=dict)
    width: int | None = None
    height: int | None = None
    prescale: float = 1.0

    @classmethod
    def from_directory(cls, directory: str | Path, video_id: str | None = None,
                       width: int | None = None, height: int | None = None,
                       prescale: float = 1.0) -> "FrameStore":
        directory = Path(directory)
        if not directory.is_dir():
            raise FileNotFoundError(f"frame directory not found: {directory}")
        paths: dict[int, Path] = {}
        for p in sorted(directory.iterdir()):
            m = FRAME_PATTERN.match(p.name)
            if m:
                idx = int(m.group(1))
                if idx in paths:
                    raise ValidationError(f"{directory}: frame {idx} present in two formats")
                paths[idx] = p
        return cls(video_id or directory.name, paths, width, height, prescale)

    def __len__(self) -> int:
        return len(self.paths)

    def indices(self) -> list[int]:
        return sorted(self.paths)


# ---------------------------------------------------------------------------
# annotations

def _load_json(path: str | Path):
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        lines = text.splitlines()
        context = lines[exc.lineno - 1].strip() if 0 < exc.lineno <= len(lines) else ""
        raise ValidationError(
            f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
            + (f" near {context[:80]!r}" if context else "")
        ) from exc


def _require(obj, key, kind, where):
    if not isinstance(obj, dict) or key not in obj:
        raise ValidationError(f"{where}: missing key {key!r}")
    value = obj[key]
    if kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise ValidationError(f"{where}: {key!r} must be {kind.__name__}, got {type(value).__name__}")
    return value


def video_from_dict(doc: dict) -> VideoAnnotations:
    video_id = _require(doc, "video_id", str, "video")
    where = f"video {video_id!r}"
    width = _require(doc, "width", int, where)
    height = _require(doc, "height", int, where)
    if width <= 0 or height <= 0:
        raise ValidationError(f"{where}: width and height must be positive")
    by_index: dict[int, FrameAnnotations] = {}
    for raw in _require(doc, "frames", list, where):
        fi = _require(raw, "frame_index", int, where)
        if fi < 0:
            raise ValidationError(f"{where}: negative frame_index {fi}")
        if fi in by_index:
            raise ValidationError(f"{where}: duplicate frame_index {fi}")
        fwhere = f"{where} frame {fi}"
        seen: set[str] = set()
        dets = []
        for d in _require(raw, "detections", list, fwhere):
            tid = _require(d, "track_id", str, fwhere)
            if tid in seen:
                raise ValidationError(f"{fwhere}: duplicate track {tid!r}")
            seen.add(tid)
            box = _require(d, "bbox", list, f"{fwhere} track {tid!r}")
            if len(box) != 4 or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in box):
                raise ValidationError(f"{fwhere} track {tid!r}: bbox must be 4 numbers")
            if not all(math.isfinite(v) for v in box):
                raise ValidationError(f"{fwhere} track {tid!r}: bbox has non-finite values")
            try:
                bbox = BoundingBox(*(float(v) for v in box))
            except ValidationError as exc:
                raise ValidationError(f"{fwhere} track {tid!r}: {exc}") from None
            dets.append(Detection(fi, tid, bbox))
        by_index[fi] = FrameAnnotations(fi, tuple(dets))
    n = max(by_index) + 1 if by_index else 0
    frames = tuple(by_index.get(i, FrameAnnotations(i, ())) for i in range(n))
    return VideoAnnotations(video_id, width, height, frames)


def video_to_dict(video: VideoAnnotations) -> dict:
    return {
        "video_id": video.video_id,
        "width": video.width,
        "height": video.height,
        "frames": [
            {
                "frame_index": f.frame_index,
                "detections": [{"track_id": d.track_id, "bbox": d.bbox.as_list()} for d in f.detections],
            }
            for f in video.frames
        ],
    }


def parse_annotations(path: str | Path) -> list[VideoAnnotations]:
    """Parse an annotation JSON file; missing frames become empty frames."""
    doc = _load_json(path)
    videos = _require(doc, "videos", list, str(path))
    out = [video_from_dict(v) for v in videos]
    ids = [v.video_id for v in out]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"{path}: duplicate video_id")
    return out


def dump_annotations(videos: Sequence[VideoAnnotations], path: str | Path) -> None:
    doc = {"videos": [video_to_dict(v) for v in videos]}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def build_tracklets(video: VideoAnnotations) -> list[Tracklet]:
    """Group detections by track id, ordered by first appearance."""
    groups: dict[str, list[Detection]] = {}
    for det in video.detections():
        groups.setdefault(det.track_id, []).append(det)
    return [Tracklet(tid, tuple(dets)) for tid, dets in groups.items()]


# ---------------------------------------------------------------------------
# ground truth

def parse_ground_truth(path: str | Path,
                       videos: Sequence[VideoAnnotations] | None = None) -> dict[str, GroundTruth]:
    """Parse ground truth, keyed by video id.

    When ``videos`` is given, series lengths are checked against the
    annotations and unknown hazard track ids produce a warning (they are kept,
    since they still count in the detection denominator).
    """
    doc = _load_json(path)
    known = {v.video_id: v for v in videos} if videos is not None else None
    out: dict[str, GroundTruth] = {}
    for raw in _require(doc, "videos", list, str(path)):
        video_id = _require(raw, "video_id", str, "ground truth")
        where = f"ground truth {video_id!r}"
        reaction = _require(raw, "reaction", list, where)
        if not all(isinstance(r, bool) for r in reaction):
            raise ValidationError(f"{where}: reaction must be a list of booleans")
        n = len(reaction)
        ann = None
        if known is not None:
            ann = known.get(video_id)
            if ann is None:
                raise ValidationError(f"{where}: video not present in annotations")
            if ann.n_frames != n:
                raise ValidationError(f"{where}: reaction series has length {n}, annotations have {ann.n_frames} frames")
        hazards = [set() for _ in range(n)]
        classes = [set() for _ in range(n)]
        for h in raw.get("hazards", []):
            fi = _require(h, "frame_index", int, where)
            if not 0 <= fi < n:
                raise ValidationError(f"{where}: hazard frame_index {fi} outside 0..{n - 1}")
            tracks = h.get("tracks", [])
            labels = h.get("classes", [])
            if not all(isinstance(t, str) for t in tracks) or not all(isinstance(c, str) for c in labels):
                raise ValidationError(f"{where} frame {fi}: tracks and classes must be strings")
            hazards[fi].update(tracks)
            classes[fi].update(labels)
            if ann is not None:
                present = {d.track_id for d in ann.frames[fi].detections}
                unknown = set(tracks) - present
                if unknown:
                    warnings.warn(f"{where} frame {fi}: hazard tracks {sorted(unknown)} not in annotations",
                                  stacklevel=2)
        if video_id in out:
            raise ValidationError(f"{where}: duplicate video")
        out[video_id] = GroundTruth(video_id, tuple(reaction),
                                    tuple(frozenset(s) for s in hazards),
                                    tuple(frozenset(s) for s in classes))
    return out


def ground_truth_to_dict(gt: GroundTruth) -> dict:
    return {
        "video_id": gt.video_id,
        "reaction": list(gt.reaction),
        "hazards": [
            {"frame_index": i, "tracks": sorted(h), "classes": sorted(c)}
            for i, (h, c) in enumerate(zip(gt.hazards, gt.classes)) if h or c
        ],
    }


def dump_ground_truth(truths: Iterable[GroundTruth], path: str | Path) -> None:
    doc = {"videos": [ground_truth_to_dict(g) for g in truths]}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# frames

def to_gray(pixels: np.ndarray) -> np.ndarray:
    """Convert an image array to float luma in [0, 1].

    Integer arrays are scaled by their dtype maximum; float arrays are taken
    to be in [0, 1] already.
    """
    arr = np.asarray(pixels)
    if np.issubdtype(arr.dtype, np.integer):
        arr = arr.astype(np.float64) / np.iinfo(arr.dtype).max
    else:
        arr = arr.astype(np.float64)
    if arr.ndim == 3:
        if arr.shape[2] == 1:
            arr = arr[..., 0]
        elif arr.shape[2] in (3, 4):
            r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
            # same weights, arranged so neutral pixels (r == g == b) map exactly to g
            arr = g + LUMA_WEIGHTS[0] * (r - g) + LUMA_WEIGHTS[2] * (b - g)
        else:
            raise ValidationError(f"unsupported channel count {arr.shape[2]}")
    elif arr.ndim != 2:
        raise ValidationError(f"unsupported image shape {arr.shape}")
    return np.clip(arr, 0.0, 1.0)


def read_image(path: str | Path) -> np.ndarray:
    """Decode an image file to a numpy array (uint8/uint16, 2-D or HxWxC)."""
    try:
        with Image.open(path) as im:
            if im.mode in ("I;16", "I;16B", "I;16L"):
                return np.array(im, dtype=np.uint16)
            if im.mode == "I":
                return np.array(im, dtype=np.int64).clip(0, 65535).astype(np.uint16)
            if im.mode not in ("L", "RGB", "RGBA"):
                im = im.convert("RGB")
            return np.array(im)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise ValidationError(f"cannot decode {path}: {exc}") from exc


def load_frame(store: FrameStore, frame_index: int) -> np.ndarray:
    path = store.paths.get(frame_index)
    if path is None:
        raise FileNotFoundError(f"video {store.video_id!r}: frame {frame_index} not in store")
    img = read_image(path)
    h, w = img.shape[:2]
    if store.width is not None and store.height is not None and (w, h) != (store.width, store.height):
        raise ValidationError(
            f"video {store.video_id!r} frame {frame_index}: decoded {w}x{h}, expected {store.width}x{store.height}")
    return img


def load_gray_frame(store: FrameStore, frame_index: int) -> np.ndarray:
    """Load one frame as a float64 luma image in [0, 1]."""
    gray = to_gray(load_frame(store, frame_index))
    if store.prescale != 1.0:
        from .flow import resize
        h, w = gray.shape
        gray = resize(gray, (max(1, round(h * store.prescale)), max(1, round(w * store.prescale))))
    return gray


def crop_square(frame: np.ndarray, bbox: BoundingBox) -> np.ndarray:
    """Square crop around ``bbox``: shifted inside the frame, shrunk only if larger than the frame."""
    fh, fw = frame.shape[:2]
    if bbox.x2 <= 0 or bbox.y2 <= 0 or bbox.x1 >= fw or bbox.y1 >= fh:
        if not (bbox.area == 0 and 0 <= bbox.x1 < fw and 0 <= bbox.y1 < fh):
            raise ValidationError(f"bbox {bbox.as_list()} lies outside the {fw}x{fh} frame")
    side = max(1, math.ceil(max(bbox.width, bbox.height)))
    side = min(side, fw, fh)
    cx, cy = bbox.center
    x0 = math.floor(cx - side / 2.0 + 0.5)
    y0 = math.floor(cy - side / 2.0 + 0.5)
    x0 = min(max(x0, 0), fw - side)
    y0 = min(max(y0, 0), fh - side)
    return frame[y0:y0 + side, x0:x0 + side]

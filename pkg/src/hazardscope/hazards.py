"""Hazard track selection.

Base strategies pick candidate tracks per frame (nearest to the frame centre,
or every track). Optional filters then drop tracks whose area-weighted
zero-shot class is an ordinary traffic class, and tracks that barely move
relative to their own size.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .ingest import Tracklet, VideoAnnotations, build_tracklets

DEFAULT_WHITELIST = ("pickup truck", "bus", "tank", "motorcycle", "cloud")
MAX_TOPK = 10


def normalize_label(label: str) -> str:
    """Lowercase, treat underscores as spaces, collapse whitespace."""
    return re.sub(r"\s+", " ", label.replace("_", " ")).strip().lower()


@dataclass(frozen=True)
class ClassPrediction:
    track_id: str
    frame_index: int
    topk: tuple[tuple[str, float], ...]
    video_id: str = ""

    def __post_init__(self):
        if len(self.topk) > MAX_TOPK:
            raise ValidationError(f"track {self.track_id!r} frame {self.frame_index}: more than {MAX_TOPK} classes")
        seen = set()
        clean = []
        for label, p in self.topk:
            norm = normalize_label(str(label))
            if not norm:
                raise ValidationError(f"track {self.track_id!r} frame {self.frame_index}: empty class label")
            if norm in seen:
                raise ValidationError(f"track {self.track_id!r} frame {self.frame_index}: class {norm!r} repeated")
            p = float(p)
            if not (math.isfinite(p) and 0.0 <= p <= 1.0):
                raise ValidationError(f"track {self.track_id!r} frame {self.frame_index}: bad probability {p}")
            seen.add(norm)
            clean.append((norm, p))
        object.__setattr__(self, "topk", tuple(clean))


@dataclass(frozen=True)
class TrackClassScore:
    track_id: str
    scores: dict[str, float]
    argmax: str | None


@dataclass(frozen=True)
class Hazard:
    track_id: str
    label: str | None = None


@dataclass(frozen=True)
class HazardSelection:
    """Per-frame ordered hazard lists for one video."""

    video_id: str
    frames: tuple[tuple[Hazard, ...], ...]

    def __len__(self) -> int:
        return len(self.frames)

    def track_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for frame in self.frames:
            for h in frame:
                seen.setdefault(h.track_id)
        return list(seen)

    def keep(self, predicate) -> "HazardSelection":
        return HazardSelection(self.video_id, tuple(tuple(h for h in f if predicate(h)) for f in self.frames))

    def relabel(self, labels: dict[str, str | None]) -> "HazardSelection":
        return HazardSelection(self.video_id, tuple(
            tuple(Hazard(h.track_id, labels.get(h.track_id, h.label)) for h in f) for f in self.frames))


@dataclass(frozen=True)
class TrajectoryFilter:
    displacement: str = "net"   # "net": first-to-last centre distance; "path": summed steps
    size: str = "max"           # compare against max or min of mean width / mean height

    def __post_init__(self):
        if self.displacement not in ("net", "path"):
            raise ValidationError("trajectory displacement must be 'net' or 'path'")
        if self.size not in ("max", "min"):
            raise ValidationError("trajectory size must be 'max' or 'min'")


@dataclass(frozen=True)
class HazardConfig:
    base: str = "all"
    k: int = 1
    filters: tuple[str, ...] = ()
    whitelist: frozenset[str] = field(default_factory=lambda: frozenset(DEFAULT_WHITELIST))
    trajectory: TrajectoryFilter = TrajectoryFilter()

    def __post_init__(self):
        if self.base not in ("all", "nearest_k"):
            raise ValidationError(f"hazard base must be 'all' or 'nearest_k', got {self.base!r}")
        if self.k < 1:
            raise ValidationError("hazard k must be >= 1")
        bad = [f for f in self.filters if f not in ("whitelist", "size")]
        if bad:
            raise ValidationError(f"unknown hazard filters {bad}")
        object.__setattr__(self, "filters", tuple(self.filters))
        object.__setattr__(self, "whitelist", frozenset(normalize_label(w) for w in self.whitelist))

    @classmethod
    def from_dict(cls, d: dict) -> "HazardConfig":
        base = d.get("base", "all")
        k = int(d.get("k", 1))
        m = re.fullmatch(r"nearest_k\((\d+)\)", base)
        if m:
            base, k = "nearest_k", int(m.group(1))
        traj = d.get("trajectory", {})
        return cls(base=base, k=k, filters=tuple(d.get("filters", ())),
                   whitelist=frozenset(d.get("whitelist", DEFAULT_WHITELIST)),
                   trajectory=TrajectoryFilter(traj.get("displacement", "net"), traj.get("size", "max")))


# ---------------------------------------------------------------------------
# base strategies

def nearest_k_tracks(video: VideoAnnotations, k: int) -> HazardSelection:
    """Per frame, the ``k`` detections closest to the frame centre."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    cx, cy = video.width / 2.0, video.height / 2.0
    frames = []
    for frame in video.frames:
        ranked = sorted(frame.detections,
                        key=lambda d: (math.hypot(d.bbox.center[0] - cx, d.bbox.center[1] - cy), d.track_id))
        frames.append(tuple(Hazard(d.track_id) for d in ranked[:k]))
    return HazardSelection(video.video_id, tuple(frames))


def all_tracks(video: VideoAnnotations) -> HazardSelection:
    return HazardSelection(video.video_id,
                           tuple(tuple(Hazard(d.track_id) for d in f.detections) for f in video.frames))


# ---------------------------------------------------------------------------
# classification filter

def area_weighted_scores(predictions: Iterable[ClassPrediction],
                         tracklets: Sequence[Tracklet]) -> dict[str, TrackClassScore]:
    """Sum of class probability times box area over the frames of each track."""
    areas = {(t.track_id, d.frame_index): d.bbox.area for t in tracklets for d in t.detections}
    sums: dict[str, dict[str, float]] = {}
    for pred in predictions:
        key = (pred.track_id, pred.frame_index)
        if key not in areas:
            raise ValidationError(f"prediction for track {pred.track_id!r} frame {pred.frame_index} has no detection")
        acc = sums.setdefault(pred.track_id, {})
        for label, p in pred.topk:
            acc[label] = acc.get(label, 0.0) + p * areas[key]
    out = {}
    for tid, scores in sums.items():
        best = min(scores, key=lambda c: (-scores[c], c)) if scores else None
        out[tid] = TrackClassScore(tid, scores, best)
    return out


def whitelist_filter(selection: HazardSelection, scores: dict[str, TrackClassScore],
                     whitelist: Iterable[str]) -> HazardSelection:
    """Drop tracks whose class is whitelisted; label the rest with their class.

    Tracks without any prediction are kept unlabelled.
    """
    allowed = {normalize_label(w) for w in whitelist}
    drop = {tid for tid, s in scores.items() if s.argmax is not None and s.argmax in allowed}
    labels = {tid: s.argmax for tid, s in scores.items()}
    return selection.keep(lambda h: h.track_id not in drop).relabel(labels)


# ---------------------------------------------------------------------------
# trajectory filter

def track_displacement(tracklet: Tracklet, mode: str = "net") -> float:
    centers = np.array([d.bbox.center for d in tracklet.detections])
    if mode == "path":
        return float(np.sqrt((np.diff(centers, axis=0) ** 2).sum(axis=1)).sum())
    return float(np.hypot(*(centers[-1] - centers[0])))


def is_static(tracklet: Tracklet, rule: TrajectoryFilter = TrajectoryFilter()) -> bool:
    """True when the track moves less than its own (mean) box size."""
    dist = track_displacement(tracklet, rule.displacement)
    mean_w = float(np.mean([d.bbox.width for d in tracklet.detections]))
    mean_h = float(np.mean([d.bbox.height for d in tracklet.detections]))
    limit = max(mean_w, mean_h) if rule.size == "max" else min(mean_w, mean_h)
    return dist < limit


def trajectory_size_filter(selection: HazardSelection, tracklets: Sequence[Tracklet],
                           rule: TrajectoryFilter = TrajectoryFilter()) -> HazardSelection:
    drop = {t.track_id for t in tracklets if is_static(t, rule)}
    return selection.keep(lambda h: h.track_id not in drop)


def select_hazards(video: VideoAnnotations, config: HazardConfig,
                   predictions: Iterable[ClassPrediction] | None = None) -> HazardSelection:
    if config.base == "all":
        selection = all_tracks(video)
    else:
        selection = nearest_k_tracks(video, config.k)
    tracklets = build_tracklets(video)
    for name in config.filters:
        if name == "whitelist":
            if predictions is None:
                raise ValidationError(f"video {video.video_id!r}: whitelist filter needs class predictions")
            scores = area_weighted_scores(predictions, tracklets)
            selection = whitelist_filter(selection, scores, config.whitelist)
        else:
            selection = trajectory_size_filter(selection, tracklets, config.trajectory)
    return selection


# ---------------------------------------------------------------------------
# prediction files

def prediction_from_dict(doc: dict) -> ClassPrediction:
    try:
        topk = tuple((str(label), float(p)) for label, p in doc["topk"])
        return ClassPrediction(str(doc["track_id"]), int(doc["frame_index"]), topk, str(doc.get("video_id", "")))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed prediction record: {exc}") from None


def read_predictions(path: str | Path) -> dict[str, list[ClassPrediction]]:
    """Read JSON-lines class predictions, grouped by video id."""
    out: dict[str, list[ClassPrediction]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                pred = prediction_from_dict(doc)
            except (json.JSONDecodeError, ValidationError) as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
            out.setdefault(pred.video_id, []).append(pred)
    return out


def write_predictions(preds: Iterable[ClassPrediction], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in preds:
            fh.write(json.dumps({"video_id": p.video_id, "track_id": p.track_id, "frame_index": p.frame_index,
                                 "topk": [[label, prob] for label, prob in p.topk]}) + "\n")

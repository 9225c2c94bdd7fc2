"""Per-frame scalar motion signals derived from annotations."""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .ingest import VideoAnnotations


class SeriesKind(str, enum.Enum):
    OBJECT_SIZE = "object_size"
    OPTICAL_FLOW = "optical_flow"
    MEDIAN_DISTANCE = "median_distance"


@dataclass(frozen=True)
class MotionSeries:
    video_id: str
    kind: SeriesKind
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValidationError("motion series must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise ValidationError(f"{self.video_id}: motion series contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", SeriesKind(self.kind))

    def __len__(self) -> int:
        return len(self.values)


def object_size_series(video: VideoAnnotations) -> MotionSeries:
    """Total bounding-box area per frame."""
    values = [sum(d.bbox.area for d in frame.detections) for frame in video.frames]
    return MotionSeries(video.video_id, SeriesKind.OBJECT_SIZE, np.array(values, dtype=np.float64))


def min_max_normalize(series: MotionSeries) -> MotionSeries:
    v = series.values
    if len(v) == 0:
        raise ValidationError("cannot normalize an empty series")
    lo, hi = v.min(), v.max()
    if hi == lo:
        out = np.zeros_like(v)
    else:
        out = (v - lo) / (hi - lo)
    return MotionSeries(series.video_id, series.kind, out)


def median_min_distance_series(video: VideoAnnotations) -> MotionSeries:
    """Median over current boxes of the distance to the nearest box center in the previous frame.

    Frame 0 and frames where either side has no detections get 0.
    """
    n = video.n_frames
    values = np.zeros(n)
    prev = None
    for i, frame in enumerate(video.frames):
        cur = np.array([d.bbox.center for d in frame.detections], dtype=np.float64).reshape(-1, 2)
        if i > 0 and len(cur) and len(prev):
            diff = cur[:, None, :] - prev[None, :, :]
            dist = np.sqrt((diff ** 2).sum(axis=2))
            values[i] = np.median(dist.min(axis=1))
        prev = cur
    return MotionSeries(video.video_id, SeriesKind.MEDIAN_DISTANCE, values)


def write_series_csv(series: MotionSeries, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame_index", "value"])
        for i, v in enumerate(series.values):
            w.writerow([i, repr(float(v))])


def read_series_csv(path: str | Path, video_id: str, kind: SeriesKind | str) -> MotionSeries:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["frame_index", "value"]:
        raise ValidationError(f"{path}: expected header frame_index,value")
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2 or int(row[0]) != lineno - 2:
            raise ValidationError(f"{path}:{lineno}: malformed or out-of-order row {row}")
        values.append(float(row[1]))
    return MotionSeries(video_id, kind, np.array(values))

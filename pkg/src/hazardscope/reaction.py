"""Driver-state step series: construction, the slope baseline, and ensembles.

A reaction series is False up to the detected reaction frame and True from
then on. Ensembles operate on the step positions; a series that never turns
True is treated as stepping at ``n`` (one past the end).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .signals import MotionSeries

DEFAULT_MIN_WINDOW = 10
DEFAULT_SLOPE_THRESHOLD = 0.0


@dataclass(frozen=True)
class ReactionSeries:
    video_id: str
    values: tuple[bool, ...]

    def __post_init__(self):
        values = tuple(bool(v) for v in self.values)
        if any(a and not b for a, b in zip(values, values[1:])):
            raise ValidationError(f"{self.video_id}: reaction series must not switch back to False")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def step(self) -> int | None:
        """Index of the first True, or None."""
        for i, v in enumerate(self.values):
            if v:
                return i
        return None

    def position(self) -> int:
        """Step index, with ``len(self)`` standing in for "never"."""
        s = self.step
        return len(self) if s is None else s


def step_from_breakpoint(bp: int | None, n: int, video_id: str = "") -> ReactionSeries:
    if bp is not None and not 0 <= bp < n:
        raise ValidationError(f"breakpoint {bp} outside series of length {n}")
    if bp is None:
        return ReactionSeries(video_id, (False,) * n)
    return ReactionSeries(video_id, (False,) * bp + (True,) * (n - bp))


def prefix_slopes(values: Sequence[float]) -> np.ndarray:
    """OLS slope of values[0..i] against i, for every prefix (NaN for i = 0)."""
    y = np.asarray(values, dtype=np.float64)
    if len(y) == 0:
        return np.zeros(0)
    # shift by the first sample: constant prefixes then give exactly 0
    y = y - y[0]
    i = np.arange(len(y), dtype=np.float64)
    cum_y = np.cumsum(y)
    cum_ty = np.cumsum(i * y)
    cnt = i + 1
    num = cum_ty - (i / 2.0) * cum_y
    den = cnt * (cnt * cnt - 1.0) / 12.0
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)


def baseline_slope_rule(signal: MotionSeries, min_window: int = DEFAULT_MIN_WINDOW,
                        slope_threshold: float = DEFAULT_SLOPE_THRESHOLD) -> ReactionSeries:
    """Flag the first frame whose prefix regression slope drops below the threshold."""
    if min_window < 2:
        raise ValidationError("min_window must be >= 2")
    n = len(signal)
    if n < min_window:
        return step_from_breakpoint(None, n, signal.video_id)
    slopes = prefix_slopes(signal.values)
    hits = np.flatnonzero(slopes[min_window - 1:] < slope_threshold)
    bp = int(hits[0]) + min_window - 1 if hits.size else None
    return step_from_breakpoint(bp, n, signal.video_id)


def _check(series: Sequence[ReactionSeries]) -> int:
    if not series:
        raise ValidationError("ensemble needs at least one series")
    n = len(series[0])
    if any(len(s) != n for s in series):
        raise ValidationError("ensemble inputs have different lengths")
    return n


def _from_position(pos: int, n: int, video_id: str) -> ReactionSeries:
    return step_from_breakpoint(pos if pos < n else None, n, video_id)


def ensemble_or(series: Sequence[ReactionSeries]) -> ReactionSeries:
    n = _check(series)
    return _from_position(min(s.position() for s in series), n, series[0].video_id)


def ensemble_and(series: Sequence[ReactionSeries]) -> ReactionSeries:
    n = _check(series)
    return _from_position(max(s.position() for s in series), n, series[0].video_id)


def ensemble_mean_position(series: Sequence[ReactionSeries]) -> ReactionSeries:
    """Step at the mean of the step positions, rounding halves down."""
    n = _check(series)
    mean = Fraction(sum(s.position() for s in series), len(series))
    pos = math.ceil(mean - Fraction(1, 2))
    return _from_position(min(max(pos, 0), n), n, series[0].video_id)


ENSEMBLES = {"or": ensemble_or, "and": ensemble_and, "mean": ensemble_mean_position}


def write_reaction_csv(series: ReactionSeries, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame_index", "driver_state_changed"])
        for i, v in enumerate(series.values):
            w.writerow([i, "True" if v else "False"])

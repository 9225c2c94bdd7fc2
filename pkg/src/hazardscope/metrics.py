"""Reaction, hazard-detection, classification and macro accuracies.

Frames whose truth set is empty have no defined per-frame ratio: they score 1
when the prediction is empty too, and are left out of both numerator and
denominator otherwise. Class sets are compared as token sets (see
``captions.tokenize``).
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .captions import tokenize
from .errors import ValidationError
from .hazards import HazardSelection
from .ingest import GroundTruth
from .reaction import ReactionSeries


def _reaction_values(x) -> tuple[bool, ...]:
    if isinstance(x, (ReactionSeries, GroundTruth)):
        x = x.values if isinstance(x, ReactionSeries) else x.reaction
    return tuple(bool(v) for v in x)


def reaction_accuracy(pred, truth) -> float:
    p, t = _reaction_values(pred), _reaction_values(truth)
    if len(p) != len(t):
        raise ValidationError(f"reaction length mismatch: predicted {len(p)}, truth {len(t)}")
    if not t:
        raise ValidationError("empty reaction series")
    return sum(a == b for a, b in zip(p, t)) / len(t)


def set_accuracy(pred: Sequence[Iterable[str]], truth: Sequence[Iterable[str]]) -> float:
    """Mean over frames of |truth & pred| / |truth| with the empty-truth convention."""
    if len(pred) != len(truth):
        raise ValidationError(f"frame count mismatch: predicted {len(pred)}, truth {len(truth)}")
    total = Fraction(0)
    count = 0
    for p, t in zip(pred, truth):
        p, t = set(p), set(t)
        if not t:
            if not p:
                total += 1
                count += 1
            continue
        total += Fraction(len(p & t), len(t))
        count += 1
    return float(total / count) if count else 0.0


def _hazard_sets(pred) -> list[set[str]]:
    if isinstance(pred, HazardSelection):
        return [{h.track_id for h in f} for f in pred.frames]
    return [set(f) for f in pred]


def _class_sets(pred) -> list[set[str]]:
    if isinstance(pred, HazardSelection):
        return [{tok for h in f if h.label for tok in tokenize(h.label)} for f in pred.frames]
    return [{tok for label in f for tok in tokenize(label)} for f in pred]


def truth_class_tokens(truth: GroundTruth) -> list[set[str]]:
    return [{tok for label in c for tok in tokenize(label)} for c in truth.classes]


def detection_accuracy(pred, truth) -> float:
    t = list(truth.hazards) if isinstance(truth, GroundTruth) else truth
    return set_accuracy(_hazard_sets(pred), t)


def classification_accuracy(pred, truth) -> float:
    """``pred``: HazardSelection or per-frame label collections (tokenized here)."""
    t = truth_class_tokens(truth) if isinstance(truth, GroundTruth) else _class_sets(truth)
    return set_accuracy(_class_sets(pred), t)


def macro_accuracy(a_reaction: float, a_detection: float, a_classific: float) -> float:
    for v in (a_reaction, a_detection, a_classific):
        if not 0.0 <= v <= 1.0:
            raise ValidationError(f"accuracy {v} outside [0, 1]")
    return (a_reaction + a_detection + a_classific) / 3.0


@dataclass(frozen=True)
class Scores:
    a_reaction: float
    a_detection: float
    a_classific: float
    a_macro: float

    @classmethod
    def of(cls, r: float, d: float, c: float) -> "Scores":
        return cls(r, d, c, macro_accuracy(r, d, c))


@dataclass(frozen=True)
class EvalReport:
    per_video: dict[str, Scores]
    overall: Scores

    def to_dict(self) -> dict:
        return {"overall": asdict(self.overall), "videos": {k: asdict(v) for k, v in self.per_video.items()}}

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["video_id", "a_reaction", "a_detection", "a_classific", "a_macro"])
            for vid, s in self.per_video.items():
                w.writerow([vid, repr(s.a_reaction), repr(s.a_detection), repr(s.a_classific), repr(s.a_macro)])


def evaluate_video(reaction, hazards, labels, truth: GroundTruth) -> Scores:
    """Score one video. ``hazards``/``labels`` are per-frame track ids and label strings."""
    return Scores.of(reaction_accuracy(reaction, truth), detection_accuracy(hazards, truth),
                     classification_accuracy(labels, truth))


def combine(per_video: Mapping[str, Scores]) -> EvalReport:
    """Unweighted mean over videos, in sorted video-id order."""
    if not per_video:
        raise ValidationError("nothing to evaluate")
    ordered = dict(sorted(per_video.items()))
    n = len(ordered)

    def mean(field: str) -> float:
        return float(sum(Fraction(getattr(s, field)) for s in ordered.values()) / n)

    return EvalReport(ordered, Scores.of(mean("a_reaction"), mean("a_detection"), mean("a_classific")))

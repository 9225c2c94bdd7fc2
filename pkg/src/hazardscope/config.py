"""Pipeline configuration (JSON file plus command-line overrides)."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .changepoint import CpdConfig
from .errors import ValidationError
from .flow import FlowParams
from .hazards import HazardConfig
from .reaction import DEFAULT_MIN_WINDOW, DEFAULT_SLOPE_THRESHOLD
from .submission import DEFAULT_SLOTS

REACTION_STRATEGIES = ("object_size", "optical_flow", "baseline")
_ENSEMBLE = re.compile(r"^ensemble\((or|and|mean)\)$")
CAPTION_BACKENDS = ("replay", "http", "none")


def check_reaction_strategy(name: str) -> str:
    if name in REACTION_STRATEGIES or _ENSEMBLE.match(name):
        return name
    raise ValidationError(
        f"unknown reaction strategy {name!r}; expected one of {REACTION_STRATEGIES} or ensemble(or|and|mean)")


@dataclass(frozen=True)
class Paths:
    annotations: Path | None = None
    frames: Path | None = None
    ground_truth: Path | None = None
    predictions: Path | None = None
    caption_cache: Path | None = None


@dataclass(frozen=True)
class PipelineConfig:
    paths: Paths = Paths()
    cpd: CpdConfig = CpdConfig()
    flow: FlowParams = FlowParams()
    flow_prescale: float = 1.0
    reaction: str = "ensemble(mean)"
    baseline_min_window: int = DEFAULT_MIN_WINDOW
    slope_threshold: float = DEFAULT_SLOPE_THRESHOLD
    hazards: HazardConfig = HazardConfig()
    classifier_url: str | None = None
    caption_backend: str = "replay"
    captioner_url: str | None = None
    max_in_flight: int = 4
    slots: int = DEFAULT_SLOTS
    jobs: int = 1
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        check_reaction_strategy(self.reaction)
        if self.caption_backend not in CAPTION_BACKENDS:
            raise ValidationError(f"captions.backend must be one of {CAPTION_BACKENDS}")
        if not self.flow_prescale > 0:
            raise ValidationError("flow.prescale must be positive")
        if self.slots < 1 or self.jobs < 1 or self.max_in_flight < 1:
            raise ValidationError("slots, jobs and max_in_flight must be >= 1")

    @classmethod
    def from_dict(cls, doc: dict, base_dir: str | Path = ".") -> "PipelineConfig":
        base_dir = Path(base_dir)

        def path(key):
            v = doc.get("paths", {}).get(key)
            if v is None:
                return None
            p = Path(v)
            return p if p.is_absolute() else base_dir / p

        flow = dict(doc.get("flow", {}))
        reaction = doc.get("reaction", {})
        hazards = dict(doc.get("hazards", {}))
        captions = doc.get("captions", {})
        return cls(
            paths=Paths(path("annotations"), path("frames"), path("ground_truth"), path("predictions"),
                        path("caption_cache")),
            cpd=CpdConfig.from_dict(doc.get("cpd", {})),
            flow=FlowParams.from_dict(flow),
            flow_prescale=float(flow.get("prescale", 1.0)),
            reaction=reaction.get("strategy", "ensemble(mean)"),
            baseline_min_window=int(reaction.get("min_window", DEFAULT_MIN_WINDOW)),
            slope_threshold=float(reaction.get("slope_threshold", DEFAULT_SLOPE_THRESHOLD)),
            hazards=HazardConfig.from_dict(hazards),
            classifier_url=hazards.get("classifier_url"),
            caption_backend=captions.get("backend", "replay"),
            captioner_url=captions.get("url"),
            max_in_flight=int(captions.get("max_in_flight", 4)),
            slots=int(doc.get("slots", DEFAULT_SLOTS)),
            jobs=int(doc.get("jobs", 1)),
        )

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: malformed JSON at line {exc.lineno}: {exc.msg}") from None
        return cls.from_dict(doc, path.parent)

    def override(self, **kw) -> "PipelineConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self

"""End-to-end orchestration: signals, reaction, hazards, captions, submission, report."""
from __future__ import annotations

import fnmatch
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import changepoint
from .captions import ReplayCache, caption_tracks, encode_png
from .config import PipelineConfig
from .errors import HazardscopeError, ValidationError
from .flow import motion_score_series, write_flow_csv
from .hazards import ClassPrediction, HazardSelection, read_predictions, select_hazards
from .ingest import (FrameStore, GroundTruth, VideoAnnotations, build_tracklets, crop_square, load_frame,
                     parse_annotations, parse_ground_truth)
from .metrics import EvalReport
from .plots import series_svg
from .reaction import (ENSEMBLES, ReactionSeries, baseline_slope_rule, step_from_breakpoint,
                       write_reaction_csv)
from .services import HttpCaptioner, HttpClassifier
from .signals import (MotionSeries, median_min_distance_series, min_max_normalize, object_size_series,
                      write_series_csv)
from .submission import SubmissionRow, SubmissionTable, evaluate_submission, write_submission

log = logging.getLogger(__name__)


class StageError(HazardscopeError):
    """Wraps a failure with the pipeline stage and video it happened in."""

    def __init__(self, stage: str, video_id: str, cause: BaseException):
        super().__init__(f"[{stage}] video {video_id!r}: {cause}")
        self.stage, self.video_id, self.cause = stage, video_id, cause


@dataclass
class VideoResult:
    video_id: str
    reaction: ReactionSeries
    hazards: HazardSelection
    signals: dict[str, MotionSeries] = field(default_factory=dict)
    breakpoints: dict[str, list[int]] = field(default_factory=dict)


def _stage(name: str, video_id: str, fn: Callable, *args, **kw):
    try:
        return fn(*args, **kw)
    except StageError:
        raise
    except (HazardscopeError, OSError, ValueError) as exc:
        raise StageError(name, video_id, exc) from exc


def load_videos(config: PipelineConfig, video_glob: str | None = None) -> list[VideoAnnotations]:
    if config.paths.annotations is None:
        raise ValidationError("config has no paths.annotations")
    videos = parse_annotations(config.paths.annotations)
    if video_glob:
        videos = [v for v in videos if fnmatch.fnmatchcase(v.video_id, video_glob)]
    return sorted(videos, key=lambda v: v.video_id)


def frame_store(config: PipelineConfig, video: VideoAnnotations, required: bool = True) -> FrameStore | None:
    root = config.paths.frames
    if root is None or not (root / video.video_id).is_dir():
        if required:
            raise ValidationError(f"video {video.video_id!r}: no frame directory under {root}")
        return None
    return FrameStore.from_directory(root / video.video_id, video.video_id, video.width, video.height,
                                     config.flow_prescale)


def _map_videos(fn, videos: Sequence[VideoAnnotations], jobs: int) -> list:
    if jobs <= 1 or len(videos) <= 1:
        return [fn(v) for v in videos]
    with ThreadPoolExecutor(jobs) as pool:
        return list(pool.map(fn, videos))


# ---------------------------------------------------------------------------
# signals and reaction

def compute_signal(kind: str, video: VideoAnnotations, config: PipelineConfig) -> MotionSeries:
    if kind == "object_size":
        return object_size_series(video)
    if kind == "median_distance":
        return median_min_distance_series(video)
    if kind == "optical_flow":
        series = motion_score_series(frame_store(config, video), config.flow)
        if len(series) != video.n_frames:
            raise ValidationError(f"{len(series)} frames on disk, {video.n_frames} annotated")
        return series
    raise ValidationError(f"unknown signal kind {kind!r}")


def _cpd_step(series: MotionSeries, config: PipelineConfig) -> tuple[ReactionSeries, list[int]]:
    normalized = min_max_normalize(series)
    bps = changepoint.detect(normalized, config.cpd)
    return step_from_breakpoint(changepoint.first_breakpoint(bps), len(series), series.video_id), bps


def compute_reaction(video: VideoAnnotations, config: PipelineConfig,
                     strategy: str | None = None) -> tuple[ReactionSeries, dict, dict]:
    strategy = strategy or config.reaction
    signals: dict[str, MotionSeries] = {}
    bps: dict[str, list[int]] = {}
    if strategy == "baseline":
        s = _stage("signals", video.video_id, median_min_distance_series, video)
        signals["median_distance"] = s
        r = baseline_slope_rule(s, config.baseline_min_window, config.slope_threshold)
        return r, signals, bps
    kinds = ["object_size", "optical_flow"] if strategy.startswith("ensemble") else [strategy]
    parts = []
    for kind in kinds:
        s = _stage("signals", video.video_id, compute_signal, kind, video, config)
        signals[kind] = s
        r, bps[kind] = _stage("changepoint", video.video_id, _cpd_step, s, config)
        parts.append(r)
    if len(parts) == 1:
        return parts[0], signals, bps
    mode = strategy[len("ensemble("):-1]
    return ENSEMBLES[mode](parts), signals, bps


# ---------------------------------------------------------------------------
# hazards and captions

def classify_video(video: VideoAnnotations, store: FrameStore, client: HttpClassifier) -> list[ClassPrediction]:
    preds = []
    for frame in video.frames:
        if not frame.detections:
            continue
        img = load_frame(store, frame.frame_index)
        for det in frame.detections:
            topk = client.classify(encode_png(crop_square(img, det.bbox)))
            preds.append(ClassPrediction(det.track_id, frame.frame_index, tuple(topk[:10]), video.video_id))
    return preds


class Resources:
    """Lazily loaded inputs shared across videos."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self._predictions = None
        self.cache = ReplayCache(config.paths.caption_cache) if config.paths.caption_cache else None
        self.captioner = None
        if config.caption_backend == "http":
            self.captioner = HttpCaptioner(config.captioner_url)
        self.classifier = None

    def predictions(self, video: VideoAnnotations) -> list[ClassPrediction] | None:
        if "whitelist" not in self.config.hazards.filters:
            return None
        if self.config.paths.predictions is not None:
            if self._predictions is None:
                path = self.config.paths.predictions
                if not path.exists():
                    raise ValidationError(f"prediction file not found: {path}")
                self._predictions = read_predictions(path)
            return self._predictions.get(video.video_id, [])
        if self.config.classifier_url:
            if self.classifier is None:
                self.classifier = HttpClassifier(self.config.classifier_url)
            return classify_video(video, frame_store(self.config, video), self.classifier)
        raise ValidationError("whitelist filter enabled but neither paths.predictions nor a classifier URL is set")


def compute_hazards(video: VideoAnnotations, config: PipelineConfig, res: Resources) -> HazardSelection:
    preds = _stage("hazards", video.video_id, res.predictions, video)
    return _stage("hazards", video.video_id, select_hazards, video, config.hazards, preds)


def compute_captions(video: VideoAnnotations, selection: HazardSelection, config: PipelineConfig,
                     res: Resources) -> dict[str, str]:
    if config.caption_backend == "none":
        return {}
    wanted = set(selection.track_ids())
    tracklets = [t for t in build_tracklets(video) if t.track_id in wanted]
    store = frame_store(config, video, required=False)
    caps = _stage("captions", video.video_id, caption_tracks, video.video_id, tracklets, store,
                  res.captioner, res.cache, config.max_in_flight)
    return {tid: c.joined for tid, c in caps.items()}


# ---------------------------------------------------------------------------
# assembly

def process_video(video: VideoAnnotations, config: PipelineConfig, res: Resources,
                  strategy: str | None = None) -> tuple[VideoResult, list[SubmissionRow]]:
    reaction, signals, bps = compute_reaction(video, config, strategy)
    hazards = compute_hazards(video, config, res)
    captions = compute_captions(video, hazards, config, res)
    rows = []
    for i, frame in enumerate(hazards.frames):
        slots = tuple((h.track_id, captions.get(h.track_id, h.label or "")) for h in frame)[:config.slots]
        rows.append(SubmissionRow(video.video_id, i, reaction.values[i], slots))
    return VideoResult(video.video_id, reaction, hazards, signals, bps), rows


@dataclass
class RunResult:
    table: SubmissionTable
    report: EvalReport | None
    videos: list[VideoResult]


def load_truth(config: PipelineConfig, videos: Sequence[VideoAnnotations]) -> dict[str, GroundTruth] | None:
    if config.paths.ground_truth is None:
        return None
    truths = parse_ground_truth(config.paths.ground_truth, None)
    wanted = {v.video_id for v in videos}
    for v in videos:
        t = truths.get(v.video_id)
        if t is None:
            raise ValidationError(f"ground truth lacks video {v.video_id!r}")
        if t.n_frames != v.n_frames:
            raise ValidationError(f"video {v.video_id!r}: ground truth has {t.n_frames} frames, "
                                  f"annotations {v.n_frames}")
    return {k: t for k, t in truths.items() if k in wanted}


def run_pipeline(config: PipelineConfig, out_dir: str | Path | None = None, video_glob: str | None = None,
                 strategy: str | None = None) -> RunResult:
    videos = load_videos(config, video_glob)
    if not videos:
        raise ValidationError("no videos selected")
    truths = load_truth(config, videos)
    res = Resources(config)
    results = _map_videos(lambda v: process_video(v, config, res, strategy), videos, config.jobs)
    table = SubmissionTable(tuple(row for _, rows in results for row in rows), config.slots)
    report = evaluate_submission(table, truths) if truths is not None else None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_submission(table, out / "submission.csv")
        if report is not None:
            report.write_json(out / "report.json")
            report.write_csv(out / "report.csv")
    return RunResult(table, report, [r for r, _ in results])


def run_signals(config: PipelineConfig, out_dir: str | Path, kinds: Iterable[str] = ("object_size",),
                video_glob: str | None = None, plots: bool = True) -> list[Path]:
    """Write ``{video}.{kind}.csv`` (and an SVG with breakpoints) per video and signal."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kinds = list(kinds)
    videos = load_videos(config, video_glob)
    if "optical_flow" in kinds:
        for v in videos:
            if config.paths.frames is None or not (config.paths.frames / v.video_id).is_dir():
                raise ValidationError(f"optical flow requested but video {v.video_id!r} has no frames directory")

    def one(video):
        written = []
        for kind in kinds:
            if kind == "optical_flow":
                s, angles = _stage("signals", video.video_id, motion_score_series,
                                   frame_store(config, video), config.flow, with_angles=True)
                p = out / f"{video.video_id}.optical_flow_polar.csv"
                write_flow_csv(s, angles, p)
                written.append(p)
            else:
                s = _stage("signals", video.video_id, compute_signal, kind, video, config)
            p = out / f"{video.video_id}.{kind}.csv"
            write_series_csv(s, p)
            written.append(p)
            if plots:
                bps = []
                if kind != "median_distance" and len(s) >= 2:
                    bps = _stage("changepoint", video.video_id, changepoint.detect,
                                 min_max_normalize(s), config.cpd)
                p = out / f"{video.video_id}.{kind}.svg"
                p.write_text(series_svg(s.values, bps, f"{video.video_id} {kind}"), encoding="utf-8")
                written.append(p)
        return written

    return [p for ps in _map_videos(one, videos, config.jobs) for p in ps]


def run_react(config: PipelineConfig, out_dir: str | Path, video_glob: str | None = None,
              strategy: str | None = None) -> dict[str, ReactionSeries]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    videos = load_videos(config, video_glob)
    results = _map_videos(lambda v: compute_reaction(v, config, strategy)[0], videos, config.jobs)
    for r in results:
        write_reaction_csv(r, out / f"{r.video_id}.reaction.csv")
    return {r.video_id: r for r in results}


def run_hazards(config: PipelineConfig, out_dir: str | Path, video_glob: str | None = None) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    videos = load_videos(config, video_glob)
    res = Resources(config)
    sels = _map_videos(lambda v: compute_hazards(v, config, res), videos, config.jobs)
    doc = {s.video_id: [[{"track_id": h.track_id, "label": h.label} for h in f] for f in s.frames]
           for s in sels}
    (out / "hazards.json").write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    return doc


def run_captions(config: PipelineConfig, out_dir: str | Path, video_glob: str | None = None) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    videos = load_videos(config, video_glob)
    res = Resources(config)

    def one(video):
        return compute_captions(video, compute_hazards(video, config, res), config, res)

    doc = {v.video_id: caps for v, caps in zip(videos, _map_videos(one, videos, config.jobs))}
    (out / "captions.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return doc

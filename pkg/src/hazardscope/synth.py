"""Deterministic synthetic mini-dataset with planted reactions, hazards and captions.

Each video shows a smooth texture that is static until the planted reaction
frame and then translates 2 px/frame to the right. Tracks: one or two moving
animals (the hazards, which grow after the reaction), one moving vehicle with
a whitelisted class, and one stationary pole-like object.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .captions import cache_key
from .ingest import (BoundingBox, Detection, FrameAnnotations, GroundTruth, VideoAnnotations, dump_annotations,
                     dump_ground_truth)

ANIMALS = ("dog", "deer", "cow", "boar", "kangaroo", "fox", "horse", "cat")
VEHICLES = ("bus", "pickup truck")
DISTRACTORS = ("bird", "snake", "lizard", "rabbit", "squirrel", "bear", "sheep", "camel", "road", "lamp",
               "bridge", "cloud", "tractor", "train")
SHIFT_PER_FRAME = 2


def _box(cx, cy, w, h, width, height) -> BoundingBox:
    x1 = float(np.clip(cx - w / 2, 0, width))
    x2 = float(np.clip(cx + w / 2, 0, width))
    y1 = float(np.clip(cy - h / 2, 0, height))
    y2 = float(np.clip(cy + h / 2, 0, height))
    return BoundingBox(round(x1, 2), round(y1, 2), round(x2, 2), round(y2, 2))


def _render(rng, n, reaction, width, height) -> list[np.ndarray]:
    margin = SHIFT_PER_FRAME * n + 8
    tex = ndimage.gaussian_filter(rng.random((height, width + margin)), 2.5)
    tex = 0.1 + 0.8 * (tex - tex.min()) / (tex.max() - tex.min())
    frames = []
    for i in range(n):
        off = SHIFT_PER_FRAME * max(0, i - reaction)
        x0 = margin - off
        frames.append((tex[:, x0:x0 + width] * 255 + 0.5).astype(np.uint8))
    return frames


def _topk(rng, label) -> list[list]:
    p_true = round(0.5 + 0.3 * float(rng.random()), 4)
    others = list(rng.choice([d for d in DISTRACTORS if d != label], size=4, replace=False))
    rest = rng.dirichlet(np.ones(4)) * (1.0 - p_true) * 0.9
    return [[label, p_true]] + [[str(o), round(float(p), 4)] for o, p in zip(others, rest)]


def _caption_texts(rng, label) -> tuple[str, str]:
    others = [str(o) for o in rng.choice([d for d in DISTRACTORS if d != label], size=4, replace=False)]
    words = [label] + others
    categories = " ".join(w.capitalize() if i == 0 else w for i, w in enumerate(words))
    verb = ("crossing", "standing on", "walking on", "near")[int(rng.integers(4))]
    sentence = f"{label.capitalize()} {verb} road ahead."
    return categories, sentence


def generate_synthetic(out_dir: str | Path, seed: int = 42, n_videos: int = 3, n_frames: int = 60,
                       width: int = 160, height: int = 120) -> dict[str, Path]:
    """Write annotations, ground truth, predictions, caption cache, frames and a config."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    videos, truths, pred_lines, cache_lines = [], [], [], []

    for v in range(n_videos):
        vid = f"video_{v:03d}"
        reaction = n_frames // 2 if v == 0 else int(rng.integers(n_frames // 3, 2 * n_frames // 3))
        tracks = {}  # track id -> (label, is_hazard, box fn)
        n_haz = 1 + v % 2
        for h in range(n_haz):
            label = str(rng.choice(ANIMALS))
            cx0 = 25.0 + 15 * h
            cy0 = height * (0.45 + 0.15 * h)
            vx = 1.0 + 0.4 * float(rng.random())
            base = 10.0 + 4 * float(rng.random())

            def hazard_box(i, cx0=cx0, cy0=cy0, vx=vx, base=base):
                side = base + 0.6 * max(0, i - reaction)
                return _box(cx0 + vx * i, cy0, side, side * 0.9, width, height)

            tracks[f"{vid}_haz{h}"] = (label, True, hazard_box)
        vlabel = str(rng.choice(VEHICLES))
        tracks[f"{vid}_car"] = (vlabel, False,
                                lambda i: _box(width - 25 - 1.0 * i, height * 0.3, 24, 16, width, height))
        tracks[f"{vid}_pole"] = ("lamp", False, lambda i: _box(width * 0.9, height * 0.6, 6, 20, width, height))

        frames, gt_h, gt_c = [], [], []
        for i in range(n_frames):
            dets = tuple(Detection(i, tid, fn(i)) for tid, (_, _, fn) in tracks.items())
            frames.append(FrameAnnotations(i, dets))
            gt_h.append(frozenset(t for t, (_, haz, _) in tracks.items() if haz))
            gt_c.append(frozenset(lbl for lbl, haz, _ in tracks.values() if haz))
            for d in dets:
                pred_lines.append({"video_id": vid, "track_id": d.track_id, "frame_index": i,
                                   "topk": _topk(rng, tracks[d.track_id][0])})
        video = VideoAnnotations(vid, width, height, tuple(frames))
        videos.append(video)
        truths.append(GroundTruth(vid, tuple(i >= reaction for i in range(n_frames)), tuple(gt_h), tuple(gt_c)))

        for tid, (label, _, _) in tracks.items():
            for rank in range(1, min(5, n_frames) + 1):
                cat, sent = _caption_texts(rng, label)
                cache_lines.append({"key": cache_key(vid, tid, rank, "categories"), "text": cat})
                cache_lines.append({"key": cache_key(vid, tid, rank, "sentence"), "text": sent})

        fdir = out / "frames" / vid
        fdir.mkdir(parents=True, exist_ok=True)
        for i, img in enumerate(_render(rng, n_frames, reaction, width, height)):
            Image.fromarray(img).save(fdir / f"frame_{i:06d}.png")

    paths = {
        "annotations": out / "annotations.json",
        "ground_truth": out / "ground_truth.json",
        "predictions": out / "predictions.jsonl",
        "caption_cache": out / "captions_cache.jsonl",
        "frames": out / "frames",
        "config": out / "config.json",
    }
    dump_annotations(videos, paths["annotations"])
    dump_ground_truth(truths, paths["ground_truth"])
    with open(paths["predictions"], "w", encoding="utf-8") as fh:
        for line in pred_lines:
            fh.write(json.dumps(line) + "\n")
    with open(paths["caption_cache"], "w", encoding="utf-8") as fh:
        for line in cache_lines:
            fh.write(json.dumps(line) + "\n")
    config = {
        "paths": {k: p.name for k, p in paths.items() if k != "config"},
        "cpd": {"mode": "penalized", "beta": "auto", "min_segment_size": 2, "gamma": "auto"},
        "flow": {"pyramid_scale": 0.5, "levels": 3, "window_size": 15, "iterations": 3,
                 "poly_n": 5, "poly_sigma": 1.1, "prescale": 1.0},
        "reaction": {"strategy": "ensemble(mean)"},
        "hazards": {"base": "all", "filters": ["whitelist", "size"]},
        "captions": {"backend": "replay"},
        "slots": 22,
        "seed": seed,
    }
    paths["config"].write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    return paths

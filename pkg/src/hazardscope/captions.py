"""Hazard captions from a vision-language backend.

Each track's largest boxes are cropped square, captioned with two prompts,
and the resulting words are ranked by frequency (ties by first appearance)
to form a short caption. A JSON-lines replay cache makes runs reproducible
without a model host.
"""
from __future__ import annotations

import hashlib
import io
import json
import logging
import string
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from PIL import Image

from .errors import BackendError, ValidationError
from .ingest import Detection, FrameStore, Tracklet, crop_square, load_frame
from .services import CaptionBackend

log = logging.getLogger(__name__)

PROMPTS = {
    "categories": (
        "Propose 5 most likely class labels of the object, the context of the image is traffic and "
        "unusual hazards such as various animals on the road. Write only the class names separated by spaces."
    ),
    "sentence": (
        "Considering the context of traffic, caption the hazard in one short sentence of max 30 characters "
        "and 6 words."
    ),
}
PROMPT_ORDER = ("categories", "sentence")
N_CROPS = 5
N_WORDS = 5
RETRIES = 3
BACKOFF = 1.0
_PUNCT = string.punctuation + "“”‘’…–—"


@dataclass(frozen=True)
class RawCaption:
    track_id: str
    crop_rank: int
    prompt_id: str
    text: str
    failed: bool = False


@dataclass(frozen=True)
class AggregatedCaption:
    track_id: str
    words: tuple[str, ...]

    @property
    def joined(self) -> str:
        return " ".join(self.words)


def rank_detections(tracklet: Tracklet, count: int = N_CROPS) -> list[Detection]:
    """Largest boxes first; equal areas keep the earlier frame."""
    ranked = sorted(tracklet.detections, key=lambda d: (-d.bbox.area, d.frame_index))
    return ranked[:count]


def select_largest_crops(tracklet: Tracklet, frames: FrameStore,
                         count: int = N_CROPS) -> list[tuple[int, np.ndarray]]:
    out = []
    for det in rank_detections(tracklet, count):
        try:
            img = load_frame(frames, det.frame_index)
        except (OSError, ValidationError) as exc:
            raise type(exc)(f"track {tracklet.track_id!r}: {exc}") from exc
        out.append((det.frame_index, crop_square(img, det.bbox)))
    return out


def encode_png(img: np.ndarray) -> bytes:
    arr = np.asarray(img)
    if arr.dtype != np.uint8 and arr.dtype != np.uint16:
        arr = (np.clip(arr, 0, 1) * 255 + 0.5).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def cache_key(video_id: str, track_id: str, crop_rank: int, prompt_id: str) -> str:
    payload = json.dumps([video_id, track_id, crop_rank, prompt_id], separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ReplayCache:
    """Append-only JSON-lines store of captioner responses."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._data: dict[str, str] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    if not line.strip():
                        continue
                    try:
                        doc = json.loads(line)
                        self._data[str(doc["key"])] = str(doc["text"])
                    except (json.JSONDecodeError, KeyError, TypeError) as exc:
                        raise ValidationError(f"{self.path}:{lineno}: bad cache record ({exc})") from None

    def __len__(self) -> int:
        return len(self._data)

    def __contains__(self, key: str) -> bool:
        return key in self._data

    def get(self, key: str) -> str | None:
        return self._data.get(key)

    def put(self, key: str, text: str) -> None:
        with self._lock:
            if key in self._data:
                return
            self._data[key] = text
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps({"key": key, "text": text}) + "\n")


def call_with_retry(fn: Callable[[], str], attempts: int = RETRIES, backoff: float = BACKOFF,
                    sleep: Callable[[float], None] = time.sleep) -> str:
    delay = backoff
    for attempt in range(1, attempts + 1):
        try:
            return fn()
        except BackendError as exc:
            if attempt == attempts:
                raise
            log.warning("backend attempt %d/%d failed: %s", attempt, attempts, exc)
            sleep(delay)
            delay *= 2
    raise AssertionError("unreachable")


def caption_crops(video_id: str, track_id: str, crops: Sequence[tuple[int, np.ndarray] | None],
                  backend: CaptionBackend | None = None, cache: ReplayCache | None = None,
                  prompts: Sequence[str] = PROMPT_ORDER, attempts: int = RETRIES,
                  backoff: float = BACKOFF, sleep: Callable[[float], None] = time.sleep) -> list[RawCaption]:
    """One raw caption per (crop, prompt); cache hits skip the backend.

    ``crops`` entries may be ``None`` when only the cache is to be consulted.
    Failures are recorded on the returned captions, never raised.
    """
    out = []
    for rank, crop in enumerate(crops, start=1):
        png = None
        for pid in prompts:
            key = cache_key(video_id, track_id, rank, pid)
            text = cache.get(key) if cache is not None else None
            if text is None:
                if backend is None or crop is None:
                    out.append(RawCaption(track_id, rank, pid, "", failed=True))
                    continue
                if png is None:
                    png = encode_png(crop[1])
                try:
                    text = call_with_retry(lambda: backend.caption(png, PROMPTS[pid]), attempts, backoff, sleep)
                except BackendError as exc:
                    log.error("caption failed for %s/%s crop %d prompt %s: %s", video_id, track_id, rank, pid, exc)
                    out.append(RawCaption(track_id, rank, pid, "", failed=True))
                    continue
                if cache is not None and text.strip():
                    cache.put(key, text)
            out.append(RawCaption(track_id, rank, pid, text, failed=not text.strip()))
    return out


def tokenize(text: str) -> list[str]:
    words = (w.strip(_PUNCT) for w in text.lower().split())
    return [w for w in words if w]


def aggregate_words(raw: Sequence[RawCaption], take: int = N_WORDS, track_id: str | None = None) -> AggregatedCaption:
    """Top ``take`` distinct words by frequency, ties broken by first appearance."""
    order = {pid: i for i, pid in enumerate(PROMPT_ORDER)}
    ok = sorted((r for r in raw if not r.failed and r.text.strip()),
                key=lambda r: (r.crop_rank, order.get(r.prompt_id, len(order))))
    counts: dict[str, int] = {}
    first: dict[str, int] = {}
    pos = 0
    for r in ok:
        for tok in tokenize(r.text):
            counts[tok] = counts.get(tok, 0) + 1
            first.setdefault(tok, pos)
            pos += 1
    ranked = sorted(counts, key=lambda t: (-counts[t], first[t]))
    tid = track_id if track_id is not None else (raw[0].track_id if raw else "")
    return AggregatedCaption(tid, tuple(ranked[:take]))


def caption_track(video_id: str, tracklet: Tracklet, store: FrameStore | None,
                  backend: CaptionBackend | None = None, cache: ReplayCache | None = None,
                  count: int = N_CROPS, take: int = N_WORDS, **retry) -> AggregatedCaption:
    ranked = rank_detections(tracklet, count)
    keys_cached = cache is not None and all(
        cache_key(video_id, tracklet.track_id, r, pid) in cache
        for r in range(1, len(ranked) + 1) for pid in PROMPT_ORDER)
    if keys_cached or backend is None or store is None:
        crops = [None] * len(ranked)
    else:
        crops = select_largest_crops(tracklet, store, count)
    raw = caption_crops(video_id, tracklet.track_id, crops, backend, cache, **retry)
    return aggregate_words(raw, take, tracklet.track_id)


def caption_tracks(video_id: str, tracklets: Sequence[Tracklet], store: FrameStore | None,
                   backend: CaptionBackend | None = None, cache: ReplayCache | None = None,
                   max_in_flight: int = 4, **kw) -> dict[str, AggregatedCaption]:
    """Caption several tracks, with at most ``max_in_flight`` concurrent backend calls."""
    if max_in_flight <= 1 or len(tracklets) <= 1:
        return {t.track_id: caption_track(video_id, t, store, backend, cache, **kw) for t in tracklets}
    with ThreadPoolExecutor(max_in_flight) as pool:
        results = list(pool.map(lambda t: caption_track(video_id, t, store, backend, cache, **kw), tracklets))
    return {t.track_id: r for t, r in zip(tracklets, results)}

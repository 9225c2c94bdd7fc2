"""HTTP clients for the external captioner and classifier services.

Captioner:  POST {base}/caption  {"image_png_base64": str, "prompt": str} -> {"text": str}
Classifier: POST {base}/classify  raw PNG bytes                          -> {"topk": [[label, prob], ...]}
"""
from __future__ import annotations

import base64
import os
from typing import Protocol

import httpx

from .errors import BackendError

CAPTIONER_URL_ENV = "HAZARDSCOPE_CAPTIONER_URL"
CLASSIFIER_URL_ENV = "HAZARDSCOPE_CLASSIFIER_URL"


class CaptionBackend(Protocol):
    def caption(self, image_png: bytes, prompt: str) -> str: ...


class HttpCaptioner:
    def __init__(self, base_url: str | None = None, timeout: float = 60.0):
        base_url = base_url or os.environ.get(CAPTIONER_URL_ENV)
        if not base_url:
            raise BackendError(f"no captioner URL given (set {CAPTIONER_URL_ENV})")
        self.url = base_url.rstrip("/") + "/caption"
        self.timeout = timeout

    def caption(self, image_png: bytes, prompt: str) -> str:
        body = {"image_png_base64": base64.b64encode(image_png).decode("ascii"), "prompt": prompt}
        try:
            resp = httpx.post(self.url, json=body, timeout=self.timeout)
        except httpx.HTTPError as exc:
            raise BackendError(f"captioner request failed: {exc}") from exc
        if resp.status_code != 200:
            raise BackendError(f"captioner returned HTTP {resp.status_code}")
        try:
            text = resp.json()["text"]
        except (ValueError, KeyError, TypeError) as exc:
            raise BackendError(f"captioner sent a malformed response: {exc}") from exc
        if not isinstance(text, str):
            raise BackendError("captioner response 'text' is not a string")
        return text


class HttpClassifier:
    def __init__(self, base_url: str | None = None, timeout: float = 60.0):
        base_url = base_url or os.environ.get(CLASSIFIER_URL_ENV)
        if not base_url:
            raise BackendError(f"no classifier URL given (set {CLASSIFIER_URL_ENV})")
        self.url = base_url.rstrip("/") + "/classify"
        self.timeout = timeout

    def classify(self, image_png: bytes) -> list[tuple[str, float]]:
        try:
            resp = httpx.post(self.url, content=image_png, headers={"Content-Type": "image/png"},
                              timeout=self.timeout)
        except httpx.HTTPError as exc:
            raise BackendError(f"classifier request failed: {exc}") from exc
        if resp.status_code != 200:
            raise BackendError(f"classifier returned HTTP {resp.status_code}")
        try:
            return [(str(label), float(p)) for label, p in resp.json()["topk"]]
        except (ValueError, KeyError, TypeError) as exc:
            raise BackendError(f"classifier sent a malformed response: {exc}") from exc

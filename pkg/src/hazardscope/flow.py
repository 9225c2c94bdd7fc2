"""Dense optical flow by polynomial expansion (Farneback) and per-frame motion scores.

Each pixel neighbourhood is approximated by a quadratic

    f(x) ~ x^T A x + b^T x + c,       x = (col, row) offset

fitted by Gaussian-weighted least squares. If the next frame is the previous
one translated by d, then b_next = b_prev - 2 A d, so d follows from the
coefficient pairs; the per-pixel equations are pooled over a box window and
refined coarse-to-fine over an image pyramid.

Flow vectors follow the usual convention ``next[y + dy, x + dx] ~ prev[y, x]``
and are stored as ``(H, W, 2)`` arrays holding ``(dx, dy)``.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ValidationError
from .ingest import FrameStore, load_gray_frame
from .signals import MotionSeries, SeriesKind

# Expansion runs on the 0..255 intensity scale so this regularizer keeps the
# same meaning as in the common 8-bit implementations.
_INTENSITY_SCALE = 255.0
_DET_EPS = 1e-3


@dataclass(frozen=True)
class FlowParams:
    pyramid_scale: float = 0.5
    levels: int = 3
    window_size: int = 15
    iterations: int = 3
    poly_n: int = 5
    poly_sigma: float = 1.1

    def __post_init__(self):
        if not 0 < self.pyramid_scale < 1:
            raise ValidationError("flow.pyramid_scale must be in (0, 1)")
        if self.levels < 1 or self.iterations < 1:
            raise ValidationError("flow.levels and flow.iterations must be >= 1")
        if self.window_size < 1 or self.window_size % 2 == 0:
            raise ValidationError("flow.window_size must be a positive odd number")
        if self.poly_n not in (5, 7):
            raise ValidationError("flow.poly_n must be 5 or 7")
        if not self.poly_sigma > 0:
            raise ValidationError("flow.poly_sigma must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "FlowParams":
        known = {k: d[k] for k in asdict(cls()) if k in d}
        return cls(**known)


@dataclass(frozen=True)
class Expansion:
    """Per-pixel quadratic coefficients: A (H, W, 2, 2), b (H, W, 2), c (H, W)."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray


@lru_cache(maxsize=8)
def expansion_kernels(poly_n: int, poly_sigma: float) -> np.ndarray:
    """Correlation kernels (6, n, n) giving coefficients of 1, x, y, x^2, y^2, xy."""
    r = poly_n // 2
    y, x = np.mgrid[-r:r + 1, -r:r + 1].astype(np.float64)
    w = np.exp(-(x ** 2 + y ** 2) / (2.0 * poly_sigma ** 2)).ravel()
    x, y = x.ravel(), y.ravel()
    basis = np.stack([np.ones_like(x), x, y, x * x, y * y, x * y], axis=1)
    gram = basis.T @ (w[:, None] * basis)
    proj = np.linalg.solve(gram, basis.T * w[None, :])
    return proj.reshape(6, poly_n, poly_n)


def polynomial_expansion(img: np.ndarray, poly_n: int = 5, poly_sigma: float = 1.1) -> Expansion:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValidationError("polynomial expansion needs a 2-D image")
    h, w = img.shape
    if h <= poly_n or w <= poly_n:
        raise ValidationError(f"image {w}x{h} too small for poly_n={poly_n}")
    kernels = expansion_kernels(poly_n, float(poly_sigma))
    coeffs = np.stack([ndimage.correlate(img, k, mode="nearest") for k in kernels], axis=-1)
    # border pixels copy the nearest interior fit
    r = poly_n // 2
    rows = np.clip(np.arange(h), r, h - 1 - r)
    cols = np.clip(np.arange(w), r, w - 1 - r)
    coeffs = coeffs[np.ix_(rows, cols)]
    c, b1, b2, a11, a22, a12 = np.moveaxis(coeffs, -1, 0)
    A = np.empty((h, w, 2, 2))
    A[..., 0, 0] = a11
    A[..., 1, 1] = a22
    A[..., 0, 1] = A[..., 1, 0] = a12 / 2.0
    return Expansion(A, np.stack([b1, b2], axis=-1), c)


def resize(img: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Bilinear resize with pixel-centre alignment."""
    h, w = img.shape[:2]
    nh, nw = shape
    rows = np.clip((np.arange(nh) + 0.5) * (h / nh) - 0.5, 0, h - 1)
    cols = np.clip((np.arange(nw) + 0.5) * (w / nw) - 0.5, 0, w - 1)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    if img.ndim == 2:
        return ndimage.map_coordinates(img, [rr, cc], order=1, mode="nearest")
    return np.stack([ndimage.map_coordinates(img[..., i], [rr, cc], order=1, mode="nearest")
                     for i in range(img.shape[2])], axis=-1)


class _Pyramid:
    """Per-level polynomial expansions of one frame, finest first."""

    def __init__(self, img: np.ndarray, params: FlowParams):
        img = np.asarray(img, dtype=np.float64) * _INTENSITY_SCALE
        h, w = img.shape
        self.shapes: list[tuple[int, int]] = []
        self.expansions: list[Expansion] = []
        for level in range(params.levels):
            scale = params.pyramid_scale ** level
            shape = (int(round(h * scale)), int(round(w * scale)))
            if level > 0 and min(shape) <= 2 * params.poly_n:
                break
            if level == 0:
                lvl = img
            else:
                sigma = (1.0 / scale - 1.0) * 0.5
                lvl = resize(ndimage.gaussian_filter(img, sigma, mode="nearest"), shape)
            self.shapes.append(shape)
            self.expansions.append(polynomial_expansion(lvl, params.poly_n, params.poly_sigma))


def _warp(arr: np.ndarray, coords: list[np.ndarray]) -> np.ndarray:
    flat = arr.reshape(arr.shape[0], arr.shape[1], -1)
    out = np.stack([ndimage.map_coordinates(flat[..., i], coords, order=1, mode="nearest")
                    for i in range(flat.shape[-1])], axis=-1)
    return out.reshape(arr.shape)


def _refine(e0: Expansion, e1: Expansion, flow: np.ndarray, window: int, iterations: int) -> np.ndarray:
    h, w = e0.c.shape
    rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)
    for _ in range(iterations):
        coords = [rows + flow[..., 1], cols + flow[..., 0]]
        A1 = _warp(e1.A, coords)
        b1 = _warp(e1.b, coords)
        A = 0.5 * (e0.A + A1)
        db = -0.5 * (b1 - e0.b) + np.einsum("...ij,...j->...i", A, flow)
        a11, a12, a22 = A[..., 0, 0], A[..., 0, 1], A[..., 1, 1]
        terms = np.stack([
            a11 * a11 + a12 * a12,
            a12 * (a11 + a22),
            a12 * a12 + a22 * a22,
            a11 * db[..., 0] + a12 * db[..., 1],
            a12 * db[..., 0] + a22 * db[..., 1],
        ])
        g11, g12, g22, h1, h2 = (ndimage.uniform_filter(t, window, mode="nearest") for t in terms)
        det = g11 * g22 - g12 * g12 + _DET_EPS
        flow = np.stack([(g22 * h1 - g12 * h2) / det, (g11 * h2 - g12 * h1) / det], axis=-1)
    return flow


def _flow_from_pyramids(p0: _Pyramid, p1: _Pyramid, params: FlowParams) -> np.ndarray:
    flow = None
    for level in range(len(p0.shapes) - 1, -1, -1):
        h, w = p0.shapes[level]
        if flow is None:
            flow = np.zeros((h, w, 2))
        else:
            ph, pw = flow.shape[:2]
            flow = resize(flow, (h, w))
            flow[..., 0] *= w / pw
            flow[..., 1] *= h / ph
        flow = _refine(p0.expansions[level], p1.expansions[level], flow,
                       params.window_size, params.iterations)
    return flow


def farneback_flow(prev: np.ndarray, next: np.ndarray, params: FlowParams | None = None) -> np.ndarray:
    """Dense flow field (H, W, 2) from ``prev`` to ``next``."""
    params = params or FlowParams()
    prev = np.asarray(prev, dtype=np.float64)
    next = np.asarray(next, dtype=np.float64)
    if prev.shape != next.shape:
        raise ValidationError(f"frame shapes differ: {prev.shape} vs {next.shape}")
    return _flow_from_pyramids(_Pyramid(prev, params), _Pyramid(next, params), params)


def to_polar(flow: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Magnitude and angle in (-pi, pi]; zero vectors get angle 0."""
    flow = np.asarray(flow, dtype=np.float64)
    dx, dy = flow[..., 0], flow[..., 1]
    mag = np.hypot(dx, dy)
    ang = np.arctan2(dy, dx)
    ang = np.where(ang <= -math.pi, math.pi, ang)
    ang = np.where(mag == 0, 0.0, ang)
    return mag, ang


def mean_angle(flow: np.ndarray) -> float:
    """Direction of the mean flow vector (0 for a zero field)."""
    mx, my = float(np.mean(flow[..., 0])), float(np.mean(flow[..., 1]))
    if mx == 0 and my == 0:
        return 0.0
    a = math.atan2(my, mx)
    return math.pi if a <= -math.pi else a


def motion_score_series(store: FrameStore, params: FlowParams | None = None, jobs: int = 1,
                        with_angles: bool = False):
    """Mean flow magnitude between consecutive frames; the first frame scores 0.

    With ``with_angles`` also returns the per-pair mean direction list.
    """
    params = params or FlowParams()
    indices = store.indices()
    if not indices:
        raise ValidationError(f"video {store.video_id!r}: no frames")
    if indices != list(range(len(indices))):
        raise ValidationError(f"video {store.video_id!r}: frame files are not contiguous from 0")

    def load_pyramid(i):
        try:
            return _Pyramid(load_gray_frame(store, i), params)
        except (OSError, ValidationError) as exc:
            raise type(exc)(f"video {store.video_id!r} frame {i}: {exc}") from exc

    n = len(indices)
    values = np.zeros(n)
    angles = [0.0] * n

    def pair(i, p0, p1):
        flow = _flow_from_pyramids(p0, p1, params)
        mag, _ = to_polar(flow)
        return float(mag.mean()), mean_angle(flow)

    if jobs <= 1:
        prev = load_pyramid(0)
        for i in range(1, n):
            cur = load_pyramid(i)
            values[i], angles[i] = pair(i, prev, cur)
            prev = cur
    else:
        with ThreadPoolExecutor(jobs) as pool:
            pyrs = list(pool.map(load_pyramid, range(n)))
            results = list(pool.map(lambda i: pair(i, pyrs[i - 1], pyrs[i]), range(1, n)))
        for i, (v, a) in enumerate(results, start=1):
            values[i], angles[i] = v, a
    series = MotionSeries(store.video_id, SeriesKind.OPTICAL_FLOW, values)
    return (series, angles) if with_angles else series


def write_flow_csv(series: MotionSeries, angles, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame_index", "magnitude_mean", "angle_mean"])
        for i, (m, a) in enumerate(zip(series.values, angles)):
            w.writerow([i, repr(float(m)), repr(float(a))])

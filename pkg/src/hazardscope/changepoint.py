"""Kernel change-point detection with an RBF kernel.

Segments are scored by their scatter in the kernel feature space,

    c(a, b) = sum_{t in [a,b)} k(x_t, x_t) - 1/(b-a) * sum_{s,t in [a,b)} k(x_s, x_t),

and the breakpoints are found exactly, either for a fixed number of changes
(dynamic programming) or with a linear penalty per change (pruned exact
search). Both dynamic programs live in a compiled extension when available,
with a numpy fallback chosen at import time (``BACKEND``).

Breakpoint ``b`` splits the series between samples ``b - 1`` and ``b``. When
several breakpoint vectors reach the optimum, the lexicographically smallest
one is returned (earliest detection).
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .signals import MotionSeries

if os.environ.get("HAZARDSCOPE_PURE_PYTHON"):
    from . import _cpd_py as _impl
    BACKEND = "python"
else:
    try:
        from . import _cpd_core as _impl
        BACKEND = "compiled"
    except ImportError:  # extension not built
        from . import _cpd_py as _impl
        BACKEND = "python"

from . import _cpd_py

DEFAULT_K = 4
DEFAULT_MIN_SEGMENT_SIZE = 2


@dataclass(frozen=True)
class KernelSpec:
    """RBF kernel; ``gamma=None`` means the median heuristic."""

    gamma: float | None = None

    def __post_init__(self):
        if self.gamma is not None and not self.gamma > 0:
            raise ValidationError(f"gamma must be positive, got {self.gamma}")

    def resolve(self, signal) -> float:
        return median_heuristic_gamma(signal) if self.gamma is None else float(self.gamma)


@dataclass(frozen=True)
class CpdConfig:
    mode: str = "fixed"
    k: int = DEFAULT_K
    beta: float | None = None
    min_segment_size: int = DEFAULT_MIN_SEGMENT_SIZE
    gamma: float | None = None

    def __post_init__(self):
        if self.mode not in ("fixed", "penalized"):
            raise ValidationError(f"cpd.mode must be 'fixed' or 'penalized', got {self.mode!r}")
        if self.k < 1:
            raise ValidationError("cpd.k must be >= 1")
        if self.min_segment_size < 1:
            raise ValidationError("cpd.min_segment_size must be >= 1")
        if self.beta is not None and not self.beta > 0:
            raise ValidationError("cpd.beta must be positive")
        KernelSpec(self.gamma)

    @classmethod
    def from_dict(cls, d: dict) -> "CpdConfig":
        gamma = d.get("gamma", "auto")
        beta = d.get("beta")
        return cls(
            mode=d.get("mode", "fixed"),
            k=int(d.get("k", DEFAULT_K)),
            beta=None if beta in (None, "auto") else float(beta),
            min_segment_size=int(d.get("min_segment_size", DEFAULT_MIN_SEGMENT_SIZE)),
            gamma=None if gamma in (None, "auto") else float(gamma),
        )

    @property
    def kernel(self) -> KernelSpec:
        return KernelSpec(self.gamma)


def _values(signal) -> np.ndarray:
    if isinstance(signal, MotionSeries):
        return signal.values
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise ValidationError("signal must be one-dimensional")
    return x


def median_heuristic_gamma(signal) -> float:
    """1 / median of the nonzero pairwise squared differences (1.0 if there are none)."""
    x = _values(signal)
    n = len(x)
    if n < 2:
        raise ValidationError("median heuristic needs at least 2 samples")
    iu = np.triu_indices(n, k=1)
    d2 = np.subtract.outer(x, x)[iu] ** 2
    d2 = d2[d2 > 0]
    if d2.size == 0:
        return 1.0
    return float(1.0 / np.median(d2))


def gram_matrix(signal, kernel: KernelSpec | float | None = None) -> np.ndarray:
    x = _values(signal)
    if isinstance(kernel, KernelSpec):
        gamma = kernel.resolve(x)
    elif kernel is None:
        gamma = median_heuristic_gamma(x)
    else:
        gamma = float(kernel)
    diff = np.subtract.outer(x, x)
    return np.exp(-gamma * diff * diff)


def segment_cost(G: np.ndarray, a: int, b: int) -> float:
    """Kernel scatter of samples [a, b), straight from the Gram matrix."""
    if not 0 <= a < b <= len(G):
        raise ValidationError(f"invalid segment [{a}, {b}) for N={len(G)}")
    block = G[a:b, a:b]
    return float(np.trace(block) - block.sum() / (b - a))


def tie_tolerance(n: int) -> float:
    """Absolute slack under which two total costs count as tied."""
    return 1e-12 * (n + 1) ** 2 + 1e-12


class KernelCost:
    """O(1) segment costs from 2-D prefix sums of the Gram matrix."""

    def __init__(self, signal, kernel: KernelSpec | None = None):
        x = _values(signal)
        kernel = kernel or KernelSpec()
        self.n = len(x)
        self.gamma = kernel.resolve(x) if self.n >= 2 else (kernel.gamma or 1.0)
        G = gram_matrix(x, self.gamma)
        S = np.zeros((self.n + 1, self.n + 1))
        np.cumsum(G, axis=0, out=S[1:, 1:])
        np.cumsum(S[1:, 1:], axis=1, out=S[1:, 1:])
        self.S = S
        self.D = np.concatenate([[0.0], np.cumsum(np.diag(G))])

    def cost(self, a: int, b: int) -> float:
        if not 0 <= a < b <= self.n:
            raise ValidationError(f"invalid segment [{a}, {b}) for N={self.n}")
        return float(_cpd_py.segment_costs(self.S, self.D, a, b))

    def total(self, breakpoints: Sequence[int]) -> float:
        edges = [0, *breakpoints, self.n]
        return sum(self.cost(a, b) for a, b in zip(edges, edges[1:]))


def _check_breakpoints(bps: list[int], n: int, min_size: int) -> list[int]:
    edges = [0, *bps, n]
    assert all(b - a >= min_size for a, b in zip(edges, edges[1:])), (bps, n, min_size)
    return [int(b) for b in bps]


def detect_fixed_k(signal, kernel: KernelSpec | None = None, k: int = DEFAULT_K,
                   min_segment_size: int = DEFAULT_MIN_SEGMENT_SIZE) -> list[int]:
    """Exactly ``k`` breakpoints minimizing the summed segment cost."""
    x = _values(signal)
    n = len(x)
    if k < 1 or min_segment_size < 1:
        raise ValidationError("k and min_segment_size must be >= 1")
    if n < (k + 1) * min_segment_size:
        raise ValidationError(
            f"cannot place {k} breakpoints in N={n} samples with min_segment_size={min_segment_size}")
    cost = KernelCost(x, kernel)
    bps, _ = _impl.fixed_k(cost.S, cost.D, k, min_segment_size, tie_tolerance(n))
    return _check_breakpoints(bps, n, min_segment_size)


def default_penalty(signal, kernel: KernelSpec | None = None) -> float:
    """2 log(N) times the median two-sample scatter (floored at 0.05)."""
    x = _values(signal)
    n = len(x)
    if n < 3:
        return 2.0 * math.log(max(n, 2)) * 0.05
    gamma = (kernel or KernelSpec()).resolve(x)
    # c(i, i+2) = 1 - k(x_i, x_{i+1}) for the RBF kernel
    pair = 1.0 - np.exp(-gamma * (x[1:] - x[:-1]) ** 2)
    proxy = max(float(np.median(pair)), 0.05)
    return 2.0 * math.log(n) * proxy


def detect_penalized(signal, kernel: KernelSpec | None = None, beta: float | None = None,
                     min_segment_size: int = DEFAULT_MIN_SEGMENT_SIZE) -> list[int]:
    """Breakpoints minimizing summed segment cost + ``beta`` per breakpoint."""
    x = _values(signal)
    n = len(x)
    if min_segment_size < 1:
        raise ValidationError("min_segment_size must be >= 1")
    if beta is None:
        beta = default_penalty(x, kernel)
    if not beta > 0:
        raise ValidationError(f"beta must be positive, got {beta}")
    if n < 2 * min_segment_size:
        return []
    cost = KernelCost(x, kernel)
    bps, _ = _impl.penalized(cost.S, cost.D, float(beta), min_segment_size, tie_tolerance(n))
    return _check_breakpoints(bps, n, min_segment_size)


def detect(signal, config: CpdConfig) -> list[int]:
    if config.mode == "fixed":
        return detect_fixed_k(signal, config.kernel, config.k, config.min_segment_size)
    return detect_penalized(signal, config.kernel, config.beta, config.min_segment_size)


def first_breakpoint(bps: Sequence[int]) -> int | None:
    return min(bps) if len(bps) else None

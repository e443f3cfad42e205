"""Causal Gaussian smoother with volatility-adaptive width.

One instance smooths one SLI channel. Each pushed sample lands in a short
ring buffer; the coefficient of variation over that buffer decides whether
the filter runs at all (perfectly stable signals pass through untouched)
and, when it runs, how wide the causal Gaussian kernel is:

    sigma_t = sigma_max * min(1, v_t / v_ref)

The output is always a convex combination of buffered samples, so it can
never leave their range.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import RangeError


@dataclass(frozen=True)
class DenoiserConfig:
    window: int = 8
    sigma_max: float = 3.0
    v_ref: float = 0.2
    v_off: float = 0.01

    def __post_init__(self):
        if self.window < 2:
            raise RangeError("window must be >= 2")
        if self.sigma_max <= 0:
            raise RangeError("sigma_max must be positive")
        if not 0 < self.v_off < self.v_ref:
            raise RangeError("need 0 < v_off < v_ref")


class Denoiser:
    """Single-channel state; push() returns the smoothed value."""

    def __init__(self, config: DenoiserConfig = DenoiserConfig()):
        self.config = config
        self.buffer: deque[float] = deque(maxlen=config.window)

    def push(self, raw: float) -> float:
        self.buffer.append(float(raw))
        buf = np.asarray(self.buffer)
        vol = buf.std() / (abs(buf.mean()) + 1e-9)
        if vol < self.config.v_off:
            return float(raw)
        sigma = self.config.sigma_max * min(1.0, vol / self.config.v_ref)
        lags = np.arange(len(buf) - 1, -1, -1, dtype=float)
        w = np.exp(-0.5 * (lags / sigma) ** 2)
        return float((w * buf).sum() / w.sum())

    def reset(self) -> None:
        self.buffer.clear()

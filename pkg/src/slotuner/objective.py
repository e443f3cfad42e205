"""Scalar cost over per-class SLO compliance ratios.

Per class i, the ratio r_i = y_i / v_i compares the measured SLI against
its threshold; r_i <= 1 means the class meets its objective. The cost is

    J(r) = LSE_c(r) + lambda * fairness(r)

with LSE_c a smooth maximum, (1/c) ln sum exp(c r_i), and fairness the
mean absolute deviation of the ratios. Lower is better.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RangeError, ShapeError


@dataclass(frozen=True)
class SloSpec:
    """Per-class SLI upper bounds (p99 FCT slowdown), labeled by DSCP."""

    thresholds: tuple[float, ...]
    labels: tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.thresholds) < 1:
            raise ShapeError("need at least one class threshold")
        if any(v <= 0 for v in self.thresholds):
            raise RangeError("SLO thresholds must be positive")
        if self.labels and len(self.labels) != len(self.thresholds):
            raise ShapeError("labels and thresholds must align")

    @property
    def n_classes(self) -> int:
        return len(self.thresholds)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.thresholds, dtype=float)


@dataclass(frozen=True)
class ObjectiveSpec:
    """Sharpness of the smooth maximum and weight of the fairness penalty."""

    c: float = 10.0
    lam: float = 0.5

    def __post_init__(self):
        if self.c <= 0:
            raise RangeError("c must be > 0")
        if self.lam < 0:
            raise RangeError("lambda must be >= 0")


def ratios(y, slo: SloSpec) -> np.ndarray:
    """Per-class compliance ratios y_i / v_i."""
    y = np.asarray(y, dtype=float)
    v = slo.as_array()
    if y.shape != v.shape:
        raise ShapeError(f"SLI vector has shape {y.shape}, SLO has {v.shape}")
    return y / v


def lse(r, c: float) -> float:
    """Smooth maximum (1/c) ln sum exp(c r_i), max-shifted so it never overflows."""
    r = np.asarray(r, dtype=float)
    m = r.max()
    return float(m + np.log(np.exp(c * (r - m)).sum()) / c)


def fairness(r) -> float:
    """Mean absolute deviation of the ratios from their mean."""
    r = np.asarray(r, dtype=float)
    if r.size == 0:
        raise ShapeError("fairness of an empty ratio vector")
    return float(np.abs(r - r.mean()).mean())


def objective(y, slo: SloSpec, spec: ObjectiveSpec = ObjectiveSpec()) -> float:
    """Scalar cost J = LSE(ratios) + lambda * fairness(ratios)."""
    r = ratios(y, slo)
    return lse(r, spec.c) + spec.lam * fairness(r)


def objective_of_ratios(r, spec: ObjectiveSpec = ObjectiveSpec()) -> float:
    """J evaluated on precomputed ratios (vectorization hook for models)."""
    r = np.asarray(r, dtype=float)
    return lse(r, spec.c) + spec.lam * fairness(r)


def objective_batch(Y: np.ndarray, slo: SloSpec, spec: ObjectiveSpec) -> np.ndarray:
    """J over a batch of SLI rows, shape (B, N) -> (B,)."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[1] != slo.n_classes:
        raise ShapeError(f"expected (B, {slo.n_classes}) SLI batch, got {Y.shape}")
    R = Y / slo.as_array()
    m = R.max(axis=1)
    smooth_max = m + np.log(np.exp(spec.c * (R - m[:, None])).sum(axis=1)) / spec.c
    mad = np.abs(R - R.mean(axis=1, keepdims=True)).mean(axis=1)
    return smooth_max + spec.lam * mad

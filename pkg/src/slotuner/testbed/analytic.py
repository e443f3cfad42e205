"""Closed-form ground truth and a deliberately biased fast predictor.

The system maps the 9-knob configuration (per-class weight w, marking
threshold K, initial window c, the latter two normalized to [0,1]) to
per-class p99 FCT slowdowns:

    y_i = B_i * (1 + L_i / (w_i + 0.05))
              * (1 + 4 (K_i - K*_i)^2)
              * (1 + 2 (c_i - c*_i)^2) * exp(nu * xi_i)

with B = (4, 5, 6), K* = (0.3, 0.5, 0.7), c* = (0.5, 0.5, 0.5) and a
load-pressure term L_i = 0.6 * load_i / mean(load). Its noise-free
optimum is known in closed form, which makes controller claims testable.

The model uses the same formula, noise-free, with perturbed constants
B~ = B (1 + b) and K~* = K* + delta. The default bias field yields
roughly 20% mean absolute SLI error against the noise-free system over
uniform random configurations, enough to mis-order nearby candidates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from ..paramspace import HYPERCUBE, SIMPLEX, ParamSpace, ParamVector, normalize
from .workload import WorkloadSpec

N_CLASSES = 3
BASE_SLOWDOWN = np.array([4.0, 5.0, 6.0])
K_STAR = np.array([0.3, 0.5, 0.7])
C_STAR = np.array([0.5, 0.5, 0.5])
LOAD_COEF = 0.6
WEIGHT_SOFT = 0.05


@dataclass(frozen=True)
class BiasField:
    """Multiplicative scale error b and marking-optimum shift delta, per class."""

    b: tuple[float, float, float] = (0.18, -0.12, 0.15)
    delta: tuple[float, float, float] = (0.13, -0.12, 0.12)

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.b, dtype=float), np.asarray(self.delta, dtype=float)


ZERO_BIAS = BiasField(b=(0.0, 0.0, 0.0), delta=(0.0, 0.0, 0.0))


def knob_layout(space: ParamSpace) -> tuple[slice, slice, slice]:
    """Flat slices (weights, marking, window) of the 9-knob space.

    Convention: one dim-3 simplex block (weights) plus two dim-3 hypercube
    blocks, the first holding marking thresholds and the second initial
    windows.
    """
    simplex = [s for s, b in zip(space.block_slices(), space.blocks) if b.kind == SIMPLEX]
    cubes = [s for s, b in zip(space.block_slices(), space.blocks) if b.kind == HYPERCUBE]
    if len(simplex) != 1 or len(cubes) != 2:
        raise ShapeError("analytic testbed needs one simplex and two hypercube blocks")
    w_sl, (k_sl, c_sl) = simplex[0], cubes
    for sl in (w_sl, k_sl, c_sl):
        if sl.stop - sl.start != N_CLASSES:
            raise ShapeError(f"analytic testbed expects {N_CLASSES} classes per block")
    return w_sl, k_sl, c_sl


def load_pressure(loads: np.ndarray) -> np.ndarray:
    loads = np.asarray(loads, dtype=float)
    if loads.shape != (N_CLASSES,):
        raise ShapeError(f"expected {N_CLASSES} per-class loads")
    return LOAD_COEF * loads / loads.mean()


def slis_batch(W: np.ndarray, K: np.ndarray, C: np.ndarray, loads: np.ndarray,
               base: np.ndarray = BASE_SLOWDOWN,
               k_star: np.ndarray = K_STAR) -> np.ndarray:
    """Noise-free slowdowns for a batch of (weights, marking, window) rows."""
    L = load_pressure(loads)
    return (base
            * (1.0 + L / (W + WEIGHT_SOFT))
            * (1.0 + 4.0 * (K - k_star) ** 2)
            * (1.0 + 2.0 * (C - C_STAR) ** 2))


def analytic_system_evaluate(x_raw: ParamVector, space: ParamSpace,
                             workload: WorkloadSpec, noise_nu: float,
                             seed: int) -> np.ndarray:
    """Single deterministic evaluation of the ground-truth system."""
    rng = np.random.default_rng(seed)
    xn = normalize(x_raw, space)
    w_sl, k_sl, c_sl = knob_layout(space)
    flat = xn.flat()[None, :]
    y = slis_batch(flat[:, w_sl], flat[:, k_sl], flat[:, c_sl], workload.loads)
    if noise_nu > 0:
        y = y * np.exp(noise_nu * rng.standard_normal((1, N_CLASSES)))
    return y[0]


def analytic_model_predict(x: ParamVector, space: ParamSpace,
                           workload: WorkloadSpec,
                           bias: BiasField = BiasField()) -> np.ndarray:
    """Biased, noise-free prediction at one configuration (raw or normalized)."""
    xn = x if x.normalized else normalize(x, space)
    w_sl, k_sl, c_sl = knob_layout(space)
    b, delta = bias.as_arrays()
    flat = xn.flat()[None, :]
    y = slis_batch(flat[:, w_sl], flat[:, k_sl], flat[:, c_sl], workload.loads,
                   base=BASE_SLOWDOWN * (1.0 + b), k_star=K_STAR + delta)
    return y[0]


class AnalyticSystem:
    """Stateful wrapper: one seeded noise stream across closed-loop steps."""

    def __init__(self, space: ParamSpace, noise_nu: float, seed: int):
        self.space = space
        self.layout = knob_layout(space)
        self.noise_nu = noise_nu
        self.rng = np.random.default_rng(seed)

    def evaluate(self, x_raw: ParamVector, workload: WorkloadSpec) -> np.ndarray:
        xn = normalize(x_raw, self.space)
        w_sl, k_sl, c_sl = self.layout
        flat = xn.flat()[None, :]
        y = slis_batch(flat[:, w_sl], flat[:, k_sl], flat[:, c_sl], workload.loads)[0]
        if self.noise_nu > 0:
            y = y * np.exp(self.noise_nu * self.rng.standard_normal(N_CLASSES))
        return y


class AnalyticModel:
    """Biased predictor exposing batched evaluation over normalized configs."""

    def __init__(self, space: ParamSpace, bias: BiasField = BiasField()):
        self.space = space
        self.layout = knob_layout(space)
        self.bias = bias
        self.calls = 0

    def slis_batch(self, X_norm: np.ndarray, workload: WorkloadSpec) -> np.ndarray:
        self.calls += 1
        X = np.atleast_2d(np.asarray(X_norm, dtype=float))
        if X.shape[1] != self.space.dim:
            raise ShapeError(f"expected {self.space.dim} normalized coords")
        w_sl, k_sl, c_sl = self.layout
        b, delta = self.bias.as_arrays()
        return slis_batch(X[:, w_sl], X[:, k_sl], X[:, c_sl], workload.loads,
                          base=BASE_SLOWDOWN * (1.0 + b), k_star=K_STAR + delta)

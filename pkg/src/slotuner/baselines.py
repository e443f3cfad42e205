"""Comparison controllers.

SelfTune-style tuner: one-point bandit gradient. Deploy a perturbation of
the center in unconstrained coordinates, observe a bounded reward
tanh(-beta * g) once the measurement has settled, step the center along
the perturbation scaled by the reward, repeat. Simplex blocks pass
through softmax before actuation, hypercube coordinates are clamped to
[0,1] after each update.

Vanilla Bayesian optimization: the main controller with the model and the
trust region ablated away, i.e. a GP fit directly on observed g with EI
maximized over the whole space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .controller import AblationFlags, Controller, ControllerConfig, StepRecord
from .errors import ConfigError
from .objective import SloSpec, objective, ratios
from .paramspace import (
    DistanceSpec,
    ParamSpace,
    ParamVector,
    from_preimage,
    mixed_distance,
    to_preimage,
)


@dataclass(frozen=True)
class SelfTuneConfig:
    delta: float = 0.1
    eta: float = 0.01
    beta_r: float = 0.3
    settle_factor: int = 2

    def __post_init__(self):
        if self.delta <= 0 or self.eta <= 0 or self.beta_r <= 0:
            raise ConfigError("delta, eta, beta_r must be positive")
        if self.settle_factor < 1:
            raise ConfigError("settle_factor must be >= 1")


def selftune_reward(g: float, beta_r: float) -> float:
    """Bounded reward in (-1, 1); lower objective, higher reward."""
    return math.tanh(-beta_r * g)


def selftune_update(center: np.ndarray, direction: np.ndarray, reward: float,
                    cfg: SelfTuneConfig, hyp_mask: np.ndarray) -> np.ndarray:
    """One bandit-gradient step; hypercube coordinates clamped to [0,1]."""
    out = center + (cfg.eta / cfg.delta) * reward * direction
    out[hyp_mask] = np.clip(out[hyp_mask], 0.0, 1.0)
    return out


class SelfTuneController:
    """One-point bandit-gradient tuner over the unconstrained pre-image."""

    def __init__(self, space: ParamSpace, slo: SloSpec, cfg: SelfTuneConfig,
                 x0: ParamVector, rng: np.random.Generator,
                 objective_spec=None):
        from .objective import ObjectiveSpec
        self.space = space
        self.slo = slo
        self.cfg = cfg
        self.rng = rng
        self.objective_spec = objective_spec or ObjectiveSpec()
        self.center = to_preimage(x0, space)
        self.hyp_mask = np.zeros(space.dim, dtype=bool)
        for sl, b in zip(space.block_slices(), space.blocks):
            if b.kind == "hypercube":
                self.hyp_mask[sl] = True
        self.direction: np.ndarray | None = None
        self.iteration = 0
        self.current = x0.copy()
        self._best: tuple[float, ParamVector] | None = None

    def _unit_sphere(self) -> np.ndarray:
        v = self.rng.normal(size=self.space.dim)
        return v / max(np.linalg.norm(v), 1e-12)

    def step(self, raw_slis, workload=None) -> StepRecord:
        raw = np.asarray(raw_slis, dtype=float)
        g_t = objective(raw, self.slo, self.objective_spec)
        r = ratios(raw, self.slo)
        compliant = bool(np.all(r <= 1.0))
        x_t = self.current
        if self._best is None or g_t < self._best[0]:
            self._best = (g_t, x_t)

        acted = self.iteration % self.cfg.settle_factor == 0
        if acted:
            if self.direction is not None:
                reward = selftune_reward(g_t, self.cfg.beta_r)
                self.center = selftune_update(self.center, self.direction,
                                              reward, self.cfg, self.hyp_mask)
            self.direction = self._unit_sphere()
            action = from_preimage(self.center + self.cfg.delta * self.direction,
                                   self.space)
        else:
            action = x_t  # settling: hold the deployed configuration

        rec = StepRecord(
            iteration=self.iteration, x=x_t, raw_slis=raw, smoothed_slis=raw,
            g=g_t, f=float("nan"), residual=float("nan"), g_best=self._best[0],
            regime_shift=False, admitted=False, action=action,
            ei=float("nan"),
            distance=mixed_distance(action, x_t, self.space, DistanceSpec()),
            compliant=compliant)
        self.current = action
        self.iteration += 1
        return rec


def make_vanilla_bo(space: ParamSpace, slo: SloSpec, config: ControllerConfig,
                    x0: ParamVector, rng: np.random.Generator) -> Controller:
    """Vanilla BO = the main pipeline with no_model + no_trust_region set."""
    flags = replace(config.ablations, no_model=True, no_trust_region=True)
    return Controller(space, slo, replace(config, ablations=flags),
                      model=None, x0=x0, rng=rng)

"""Expected Improvement with a quadratic trust-region penalty.

The proposer minimizes A(x) = -EI(x) + penalty(x) over the unconstrained
pre-image of the parameter space: hypercube coordinates are searched
directly in [0,1], simplex blocks as logits mapped through softmax before
every evaluation. EI is anchored at the best objective the system has
actually achieved, never at a model prediction, and the penalty grows as
beta * (d - epsilon)^2 outside the distance ball around that incumbent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from ._search import multistart_pattern_search
from .errors import ProposalError, RangeError
from .paramspace import (
    HYPERCUBE,
    DistanceSpec,
    ParamSpace,
    ParamVector,
    clr,
    from_preimage,
    to_preimage,
)
from .surrogate import GpModel, predict_batch

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
LOGIT_BOUND = 10.0


@dataclass(frozen=True)
class TrustRegionSpec:
    epsilon: float = 0.3
    beta: float = 1e4
    distance: DistanceSpec = field(default_factory=DistanceSpec)

    def __post_init__(self):
        if self.epsilon <= 0 or self.beta <= 0:
            raise RangeError("epsilon and beta must be positive")


@dataclass(frozen=True)
class ProposalConfig:
    n_starts: int = 64
    local_budget: int = 200
    uniform_fraction: float = 0.5


@dataclass(frozen=True)
class Proposal:
    x: ParamVector
    acq_value: float
    ei: float
    distance: float
    mu_g: float
    sigma_g: float


def expected_improvement(mu, sigma, g_best: float):
    """Closed-form EI for a Gaussian belief, minimization convention.

    At sigma == 0 this degenerates to max(g_best - mu, 0).
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    improve = g_best - mu
    out = np.maximum(improve, 0.0)
    pos = sigma > 0
    if np.any(pos):
        z = np.where(pos, improve / np.where(pos, sigma, 1.0), 0.0)
        phi = INV_SQRT_2PI * np.exp(-0.5 * z * z)
        ei = improve * ndtr(z) + sigma * phi
        out = np.where(pos, np.maximum(ei, 0.0), out)
    if out.ndim == 0:
        return float(out)
    return out


def tr_penalty(d, spec: TrustRegionSpec):
    """Zero inside the ball, beta * (d - epsilon)^2 beyond it."""
    d = np.asarray(d, dtype=float)
    excess = np.maximum(d - spec.epsilon, 0.0)
    out = spec.beta * excess * excess
    if out.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# Batched geometry over pre-image candidates
# ---------------------------------------------------------------------------

class _Geometry:
    """Vectorized softmax/clr/distance machinery for one parameter space."""

    def __init__(self, space: ParamSpace, dspec: DistanceSpec, x_best: ParamVector):
        self.space = space
        self.dspec = dspec
        self.slices = space.block_slices()
        self.kinds = [b.kind for b in space.blocks]
        self.hyp_mask = np.zeros(space.dim, dtype=bool)
        for s, k in zip(self.slices, self.kinds):
            if k == HYPERCUBE:
                self.hyp_mask[s] = True
        self.best_flat = x_best.flat()
        self.best_clr = [clr(b, dspec.simplex_floor)
                         for b, bs in zip(x_best.blocks, space.blocks)
                         if bs.kind != HYPERCUBE]

    def map_batch(self, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Pre-image rows -> (normalized flat rows, GP-input rows, distances)."""
        X = np.empty_like(Z)
        G = np.empty_like(Z)
        sq = np.zeros(len(Z))
        si = 0
        for s, kind in zip(self.slices, self.kinds):
            if kind == HYPERCUBE:
                X[:, s] = np.clip(Z[:, s], 0.0, 1.0)
                G[:, s] = X[:, s]
                diff = X[:, s] - self.best_flat[s]
                sq += np.einsum("bd,bd->b", diff, diff)
            else:
                zb = Z[:, s]
                e = np.exp(zb - zb.max(axis=1, keepdims=True))
                u = e / e.sum(axis=1, keepdims=True)
                X[:, s] = u
                uc = np.maximum(u, self.dspec.simplex_floor)
                uc = uc / uc.sum(axis=1, keepdims=True)
                lc = np.log(uc)
                lc -= lc.mean(axis=1, keepdims=True)
                G[:, s] = lc
                diff = lc - self.best_clr[si]
                sq += self.dspec.alpha * np.einsum("bd,bd->b", diff, diff)
                si += 1
        return X, G, np.sqrt(sq)


def acquisition_value(x: ParamVector, model: GpModel | None, f_model,
                      g_best: float, tr: TrustRegionSpec | None,
                      x_best: ParamVector, space: ParamSpace,
                      sigma_override: float | None = None) -> float:
    """-EI + penalty at a single normalized point (reference path for tests)."""
    geo = _Geometry(space, tr.distance if tr else DistanceSpec(), x_best)
    z = to_preimage(x, space, geo.dspec.simplex_floor)
    _, G, d = geo.map_batch(z[None, :])
    f = float(np.asarray(f_model(x.flat()[None, :]))[0])
    if sigma_override is not None:
        mu_g, sigma = f, sigma_override
    elif model is not None:
        mu, var = predict_batch(model, G)
        mu_g, sigma = f + float(mu[0]), math.sqrt(max(float(var[0]), 0.0))
    else:
        mu_g, sigma = f, 0.0
    pen = tr_penalty(d[0], tr) if tr is not None else 0.0
    return float(-expected_improvement(mu_g, sigma, g_best) + pen)


def _tr_starts(rng: np.random.Generator, z_best: np.ndarray, geo: _Geometry,
               tr: TrustRegionSpec, cfg: ProposalConfig) -> np.ndarray:
    """Start mix: uniform inside the trust ball (rejection) plus Gaussian
    perturbations of the incumbent at scale epsilon/2."""
    dim = z_best.size
    n_uni = int(round(cfg.n_starts * cfg.uniform_fraction))
    n_gauss = cfg.n_starts - n_uni

    # Pre-image directions scaled so the mixed distance stays ~<= epsilon,
    # then verified and shrunk where the softmax/clr mapping bends the ball.
    logit_scale = 1.0 / math.sqrt(max(geo.dspec.alpha, 1.0))
    dirs = rng.normal(size=(n_uni, dim))
    dirs /= np.maximum(np.linalg.norm(dirs, axis=1, keepdims=True), 1e-12)
    radii = tr.epsilon * rng.uniform(size=(n_uni, 1)) ** (1.0 / dim)
    offs = dirs * radii
    offs[:, ~geo.hyp_mask] *= logit_scale
    cand = z_best + offs
    for _ in range(30):
        _, _, d = geo.map_batch(cand)
        outside = d > tr.epsilon
        if not np.any(outside):
            break
        cand[outside] = z_best + (cand[outside] - z_best) * 0.5

    gauss = z_best + rng.normal(scale=tr.epsilon / 2.0, size=(n_gauss, dim))
    return np.vstack([cand, gauss])


def _global_starts(rng: np.random.Generator, geo: _Geometry, space: ParamSpace,
                   cfg: ProposalConfig) -> np.ndarray:
    Z = np.empty((cfg.n_starts, space.dim))
    Z[:, geo.hyp_mask] = rng.uniform(size=(cfg.n_starts, int(geo.hyp_mask.sum())))
    n_logit = space.dim - int(geo.hyp_mask.sum())
    if n_logit:
        Z[:, ~geo.hyp_mask] = rng.uniform(-3.0, 3.0, size=(cfg.n_starts, n_logit))
    return Z


def propose(model: GpModel | None, f_model, g_best: float, x_best: ParamVector,
            space: ParamSpace, tr: TrustRegionSpec | None,
            cfg: ProposalConfig, rng: np.random.Generator,
            dspec: DistanceSpec | None = None,
            sigma_override: float | None = None) -> Proposal:
    """Multi-start pattern search for the next configuration.

    ``f_model`` maps a batch of flattened normalized configurations to
    model objective values. ``model`` may be None (residual treated as 0)
    and ``tr`` may be None (no penalty, global starts). When
    ``sigma_override`` is given the posterior is bypassed entirely and the
    belief is (f, sigma_override).

    Candidates are ranked by (-EI + penalty, mu_g + penalty, distance), so
    a degenerate flat-EI landscape falls back to minimizing the predicted
    objective and then proximity to the incumbent.
    """
    if dspec is None:
        dspec = tr.distance if tr is not None else DistanceSpec()
    geo = _Geometry(space, dspec, x_best)
    z_best = to_preimage(x_best, space, dspec.simplex_floor)

    def eval_fn(Z):
        X, G, d = geo.map_batch(Z)
        f = np.asarray(f_model(X), dtype=float)
        if sigma_override is not None:
            mu_g = f
            sigma = np.full(len(Z), float(sigma_override))
        elif model is not None:
            mu_r, var = predict_batch(model, G)
            mu_g = f + mu_r
            sigma = np.sqrt(var)
        else:
            mu_g = f
            sigma = np.zeros(len(Z))
        ei = expected_improvement(mu_g, sigma, g_best)
        pen = tr_penalty(d, tr) if tr is not None else np.zeros(len(Z))
        return (-ei + pen, mu_g + pen, d)

    if tr is not None:
        starts = _tr_starts(rng, z_best, geo, tr, cfg)
        step0 = np.full(space.dim, tr.epsilon / 4.0)
        step0[~geo.hyp_mask] /= math.sqrt(max(dspec.alpha, 1.0))
    else:
        starts = _global_starts(rng, geo, space, cfg)
        step0 = np.full(space.dim, 0.25)

    lo = np.where(geo.hyp_mask, 0.0, -LOGIT_BOUND)
    hi = np.where(geo.hyp_mask, 1.0, LOGIT_BOUND)

    z_star, key, _ = multistart_pattern_search(
        eval_fn, starts, lo, hi, cfg.local_budget, step0)
    if not np.isfinite(key[0]):
        raise ProposalError("all acquisition evaluations were non-finite")

    X, G, d = geo.map_batch(z_star[None, :])
    f = float(np.asarray(f_model(X))[0])
    if sigma_override is not None:
        mu_g, sigma = f, float(sigma_override)
    elif model is not None:
        mu_r, var = predict_batch(model, G)
        mu_g, sigma = f + float(mu_r[0]), math.sqrt(max(float(var[0]), 0.0))
    else:
        mu_g, sigma = f, 0.0
    ei = float(expected_improvement(mu_g, sigma, g_best))
    pen = float(tr_penalty(d[0], tr)) if tr is not None else 0.0
    return Proposal(x=from_preimage(z_star, space), acq_value=-ei + pen,
                    ei=ei, distance=float(d[0]), mu_g=mu_g, sigma_g=sigma)

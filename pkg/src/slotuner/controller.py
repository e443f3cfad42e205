"""The closed control loop.

Each step: denoise the raw SLIs, collapse them to the scalar objective g,
check for a regime shift against the rolling best, query the fast model
for f at the current configuration, form the residual g - f, decide
whether to admit the sample (novel or surprising), refit the residual GP
on the admitted window, and propose the next configuration by trust-region
Expected Improvement around the rolling best point.

Ablation flags each disable exactly one stage: no_denoiser (smoothed =
raw), no_model (f = 0, so the GP models g directly), no_correction (the
predictor is f with a fixed spread sigma0; the GP is still fitted but
ignored), no_trust_region (no penalty, global proposal starts).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .acquisition import Proposal, ProposalConfig, TrustRegionSpec, propose
from .denoiser import Denoiser, DenoiserConfig
from .errors import ConfigError, ProposalError, SlotunerError, StateError
from .objective import ObjectiveSpec, SloSpec, objective, objective_batch, ratios
from .paramspace import DistanceSpec, ParamSpace, ParamVector, mixed_distance
from .surrogate import (
    FitConfig,
    GpModel,
    SurrogatePosterior,
    TrainingSet,
    bic_select,
    corrected_predict,
    fit,
    gp_input,
    predict,
)


@dataclass(frozen=True)
class AblationFlags:
    no_trust_region: bool = False
    no_correction: bool = False
    no_model: bool = False
    no_denoiser: bool = False

    @classmethod
    def from_tokens(cls, tokens) -> "AblationFlags":
        mapping = {
            "no_tr": "no_trust_region",
            "no_trust_region": "no_trust_region",
            "no_correction": "no_correction",
            "no_model": "no_model",
            "no_denoiser": "no_denoiser",
        }
        kwargs = {}
        for tok in tokens:
            tok = tok.strip()
            if not tok:
                continue
            if tok not in mapping:
                raise ConfigError(f"unknown ablation flag {tok!r}")
            kwargs[mapping[tok]] = True
        return cls(**kwargs)


@dataclass(frozen=True)
class ControllerConfig:
    objective: ObjectiveSpec = field(default_factory=ObjectiveSpec)
    trust_region: TrustRegionSpec = field(default_factory=TrustRegionSpec)
    proposal: ProposalConfig = field(default_factory=ProposalConfig)
    denoiser: DenoiserConfig = field(default_factory=DenoiserConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    window_best: int = 20          # W_g, rolling-best lookback
    window_samples: int = 64       # W_s, sample window
    spike_factor: float = 1.5      # phi
    spike_count: int = 2           # consecutive spikes to call a regime shift
    novelty_distance: float = 0.02
    surprise_kappa: float = 1.0
    surprise_rel: float = 0.05
    sigma0: float = 0.1            # fixed spread under no_correction
    use_bic_selection: bool = False
    ablations: AblationFlags = field(default_factory=AblationFlags)

    def __post_init__(self):
        if self.window_best < 1 or self.window_samples < 2:
            raise ConfigError("need window_best >= 1 and window_samples >= 2")
        if self.spike_factor <= 1 or self.spike_count < 1:
            raise ConfigError("need spike_factor > 1 and spike_count >= 1")


@dataclass
class Sample:
    iteration: int
    x: ParamVector                 # normalized
    gp_x: np.ndarray
    raw_slis: np.ndarray
    smoothed_slis: np.ndarray
    g: float
    f: float
    residual: float
    admitted: bool


@dataclass
class StepRecord:
    """Everything one step produced, for traces and stage-equality tests."""

    iteration: int
    x: ParamVector                 # configuration that was measured
    raw_slis: np.ndarray
    smoothed_slis: np.ndarray
    g: float
    f: float
    residual: float
    g_best: float
    regime_shift: bool
    admitted: bool
    action: ParamVector            # next configuration to actuate
    ei: float
    distance: float
    compliant: bool
    proposal_failed: bool = False
    model_failed: bool = False


class Controller:
    """Trust-region, residual-corrected closed-loop tuner."""

    def __init__(self, space: ParamSpace, slo: SloSpec, config: ControllerConfig,
                 model, x0: ParamVector, rng: np.random.Generator):
        if not x0.normalized:
            raise ConfigError("controller works on normalized configurations")
        self.space = space
        self.slo = slo
        self.config = config
        self.model = model
        self.rng = rng
        self.dspec: DistanceSpec = config.trust_region.distance

        self.iteration = 0
        self.current = x0.copy()
        self.window: deque[Sample] = deque(maxlen=config.window_samples)
        self.best_window: deque[tuple[float, ParamVector]] = deque(maxlen=config.window_best)
        self.spike_streak = 0
        self.gp: GpModel | None = None
        self.denoisers = [Denoiser(config.denoiser) for _ in range(slo.n_classes)]

    # -- pipeline stages -----------------------------------------------------

    def _smooth(self, raw: np.ndarray) -> np.ndarray:
        if self.config.ablations.no_denoiser:
            return raw.astype(float).copy()
        return np.array([d.push(v) for d, v in zip(self.denoisers, raw)])

    def detect_regime_shift(self, g_t: float) -> bool:
        """Spike bookkeeping; True once the streak reaches the threshold.

        The caller performs the actual reset (history restart, incumbent
        redesignation).
        """
        if not self.best_window:
            return False
        g_best = min(g for g, _ in self.best_window)
        if g_t > self.config.spike_factor * g_best:
            self.spike_streak += 1
        else:
            self.spike_streak = 0
        if self.spike_streak >= self.config.spike_count:
            self.spike_streak = 0
            return True
        return False

    def rolling_best(self) -> tuple[float, ParamVector]:
        if not self.best_window:
            raise StateError("no observations since the last reset")
        g, x = min(self.best_window, key=lambda p: p[0])
        return g, x

    def _predict_g(self, gp_x: np.ndarray, f_value: float) -> tuple[float, float]:
        """Corrected prediction (mu, sigma) at a GP-input point."""
        if self.config.ablations.no_correction:
            return f_value, self.config.sigma0
        if self.gp is None:
            return f_value, 0.0
        post = predict(self.gp, gp_x)
        return corrected_predict(f_value, post)

    def admit(self, x: ParamVector, gp_x: np.ndarray, g_obs: float,
              f_value: float) -> bool:
        """Novel (far from the window) or surprising (badly mispredicted)."""
        if not self.window:
            return True
        dmin = min(mixed_distance(x, s.x, self.space, self.dspec) for s in self.window)
        if dmin > self.config.novelty_distance:
            return True
        mu_hat, sigma_hat = self._predict_g(gp_x, f_value)
        gate = max(self.config.surprise_kappa * sigma_hat,
                   self.config.surprise_rel * abs(g_obs))
        return abs(mu_hat - g_obs) > gate

    def _refit(self) -> None:
        data = [s for s in self.window if s.admitted]
        if not data:
            return
        train = TrainingSet(X=np.stack([s.gp_x for s in data]),
                            residuals=np.array([s.residual for s in data]),
                            max_size=self.config.window_samples)
        try:
            if self.config.use_bic_selection:
                self.gp = bic_select(train, cfg=self.config.fit, rng=self.rng)
            else:
                self.gp = fit(train, self.config.fit, self.rng)
        except SlotunerError:
            pass  # keep the previous model

    def _f_batch(self, workload):
        if self.config.ablations.no_model or self.model is None:
            return lambda X: np.zeros(len(np.atleast_2d(X)))
        def f(X):
            Y = self.model.slis_batch(np.atleast_2d(X), workload)
            return objective_batch(Y, self.slo, self.config.objective)
        return f

    # -- the loop ------------------------------------------------------------

    def step(self, raw_slis, workload) -> StepRecord:
        raw = np.asarray(raw_slis, dtype=float)
        x_t = self.current
        t = self.iteration

        smoothed = self._smooth(raw)
        g_t = objective(smoothed, self.slo, self.config.objective)
        r = ratios(smoothed, self.slo)
        compliant = bool(np.all(r <= 1.0))

        shift = self.detect_regime_shift(g_t)
        if shift:
            self.best_window.clear()
        self.best_window.append((g_t, x_t))

        f_batch = self._f_batch(workload)
        model_failed = False
        try:
            f_t = float(f_batch(x_t.flat()[None, :])[0])
        except Exception:
            model_failed = True
            f_t = float("nan")

        gp_x = gp_input(x_t, self.space, self.dspec.simplex_floor)
        if model_failed:
            admitted = False
            residual = float("nan")
        else:
            residual = g_t - f_t
            admitted = self.admit(x_t, gp_x, g_t, f_t)
        self.window.append(Sample(
            iteration=t, x=x_t, gp_x=gp_x, raw_slis=raw, smoothed_slis=smoothed,
            g=g_t, f=f_t, residual=residual, admitted=admitted))
        if admitted:
            self._refit()

        g_best, x_best = self.rolling_best()
        tr = None if self.config.ablations.no_trust_region else self.config.trust_region
        sigma_override = self.config.sigma0 if self.config.ablations.no_correction else None
        proposal_failed = False
        try:
            prop = propose(self.gp, f_batch, g_best, x_best, self.space, tr,
                           self.config.proposal, self.rng, dspec=self.dspec,
                           sigma_override=sigma_override)
            action, ei, dist = prop.x, prop.ei, prop.distance
        except ProposalError:
            proposal_failed = True
            action = x_best.copy()
            ei = float("nan")
            dist = 0.0

        self.current = action
        self.iteration += 1
        return StepRecord(
            iteration=t, x=x_t, raw_slis=raw, smoothed_slis=smoothed,
            g=g_t, f=f_t, residual=residual, g_best=g_best,
            regime_shift=shift, admitted=admitted, action=action,
            ei=ei, distance=dist, compliant=compliant,
            proposal_failed=proposal_failed, model_failed=model_failed)

"""Gaussian-process regression over objective residuals.

The closed loop learns R(x) = g(x) - f(x), the gap between the measured
system objective and the fast model's objective, which is smoother and
smaller than g itself. The GP returns a posterior mean/variance at any
query point; the bias-corrected predictor is f + mu_R with uncertainty
sigma_R.

GP inputs live in an unconstrained embedding: hypercube coordinates
pass through in [0,1] and each simplex block is clr-transformed.

Hyperparameters (ARD length scales, signal/noise variance, optional
constant mean) maximize the log marginal likelihood with a bounded
multi-start pattern search; the fitted model caches a Cholesky factor of
K + sigma_n^2 I so predictions are cheap. Kernel/mean family selection by
BIC is available behind :func:`bic_select`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from ._search import multistart_pattern_search
from .errors import NumericError, ShapeError, StateError
from .paramspace import ParamSpace, ParamVector, to_preimage

LOG_2PI = math.log(2.0 * math.pi)
SQRT5 = math.sqrt(5.0)

KERNEL_SE = "squared_exponential"
KERNEL_MATERN52 = "matern52"
MEAN_ZERO = "zero"
MEAN_CONSTANT = "constant"


@dataclass(frozen=True)
class GpHyperparams:
    length_scales: np.ndarray
    signal_var: float
    noise_var: float
    kernel: str = KERNEL_SE
    mean: str = MEAN_CONSTANT
    mean_value: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "length_scales",
                           np.asarray(self.length_scales, dtype=float))
        if np.any(self.length_scales <= 0) or self.signal_var <= 0:
            raise NumericError("length scales and signal variance must be positive")
        if self.noise_var < 0:
            raise NumericError("noise variance must be >= 0")
        if self.kernel not in (KERNEL_SE, KERNEL_MATERN52):
            raise ShapeError(f"unknown kernel {self.kernel!r}")
        if self.mean not in (MEAN_ZERO, MEAN_CONSTANT):
            raise ShapeError(f"unknown mean {self.mean!r}")

    @property
    def n_params(self) -> int:
        base = self.length_scales.size + 2
        return base + (1 if self.mean == MEAN_CONSTANT else 0)

    @property
    def prior_mean(self) -> float:
        return self.mean_value if self.mean == MEAN_CONSTANT else 0.0


@dataclass
class TrainingSet:
    """Residual observations (inputs already in GP coordinates)."""

    X: np.ndarray
    residuals: np.ndarray
    max_size: int | None = None

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.residuals = np.asarray(self.residuals, dtype=float)
        if self.X.shape[0] != self.residuals.shape[0]:
            raise ShapeError("inputs and residuals must align")
        if self.max_size is not None and self.X.shape[0] > self.max_size:
            raise ShapeError(f"training set exceeds window size {self.max_size}")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class SurrogatePosterior:
    mu: float
    var: float


@dataclass(frozen=True)
class FitConfig:
    n_starts: int = 8
    budget: int = 200
    length_scale_bounds: tuple[float, float] = (0.05, 5.0)
    signal_var_bounds: tuple[float, float] = (1e-4, 25.0)
    noise_var_bounds: tuple[float, float] = (1e-8, 1.0)
    jitter: float = 1e-8
    max_jitter: float = 1e-4


@dataclass
class GpModel:
    hyper: GpHyperparams
    X: np.ndarray
    y: np.ndarray
    chol: np.ndarray
    alpha: np.ndarray
    extra_jitter: float = 0.0

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]


def gp_input(x: ParamVector, space: ParamSpace, floor: float = 1e-6) -> np.ndarray:
    """Embed a normalized configuration into GP coordinates."""
    return to_preimage(x, space, floor)


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

def _scaled_sqdist(X1: np.ndarray, X2: np.ndarray, ls: np.ndarray) -> np.ndarray:
    d = (X1[:, None, :] - X2[None, :, :]) / ls
    return np.einsum("mnd,mnd->mn", d, d)


def _kernel_from_sqdist(Q: np.ndarray, signal_var: float, kernel: str) -> np.ndarray:
    if kernel == KERNEL_SE:
        return signal_var * np.exp(-0.5 * Q)
    r = np.sqrt(np.maximum(Q, 0.0))
    return signal_var * (1.0 + SQRT5 * r + (5.0 / 3.0) * Q) * np.exp(-SQRT5 * r)


def cross_kernel(hyper: GpHyperparams, X1: np.ndarray, X2: np.ndarray) -> np.ndarray:
    return _kernel_from_sqdist(_scaled_sqdist(X1, X2, hyper.length_scales),
                               hyper.signal_var, hyper.kernel)


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

def _factorize(hyper: GpHyperparams, X: np.ndarray, y: np.ndarray,
               cfg: FitConfig) -> GpModel:
    n = X.shape[0]
    K = cross_kernel(hyper, X, X)
    base = K + hyper.noise_var * np.eye(n)
    extra = 0.0
    while True:
        try:
            L = cholesky(base + extra * np.eye(n), lower=True)
            break
        except np.linalg.LinAlgError:
            extra = cfg.jitter if extra == 0.0 else extra * 10.0
            if extra > cfg.max_jitter:
                raise NumericError(
                    f"covariance not positive definite after jitter {cfg.max_jitter}")
    resid = y - hyper.prior_mean
    a = cho_solve((L, True), resid)
    return GpModel(hyper=hyper, X=X.copy(), y=y.copy(), chol=L, alpha=a,
                   extra_jitter=extra)


def _lml_batch(D2: np.ndarray, y: np.ndarray, kernel: str, mean_kind: str,
               theta: np.ndarray) -> np.ndarray:
    """Log marginal likelihood for a batch of hyperparameter vectors.

    theta columns: log length scales (d), log signal var, log noise var,
    then the constant mean when mean_kind == constant.
    """
    n = y.size
    d = D2.shape[2]
    inv_ls2 = np.exp(-2.0 * theta[:, :d])
    sv = np.exp(theta[:, d])
    nv = np.exp(theta[:, d + 1])
    m = theta[:, d + 2] if mean_kind == MEAN_CONSTANT else np.zeros(len(theta))

    Q = np.einsum("ijd,bd->bij", D2, inv_ls2)
    K = _kernel_from_sqdist(Q, 1.0, kernel) * sv[:, None, None]
    K[:, np.arange(n), np.arange(n)] += nv[:, None]

    ok = np.ones(len(theta), dtype=bool)
    try:
        L = np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        L = np.empty_like(K)
        for b in range(len(theta)):
            try:
                L[b] = np.linalg.cholesky(K[b])
            except np.linalg.LinAlgError:
                L[b] = np.eye(n)
                ok[b] = False
    logdet = 2.0 * np.log(np.diagonal(L, axis1=1, axis2=2)).sum(axis=1)
    yc = y[None, :] - m[:, None]
    z = np.linalg.solve(L, yc[:, :, None])[:, :, 0]
    lml = -0.5 * ((z * z).sum(axis=1) + logdet + n * LOG_2PI)
    lml[~ok] = -np.inf
    return lml


def fit(data: TrainingSet, cfg: FitConfig = FitConfig(),
        rng: np.random.Generator | None = None,
        hyperparams: GpHyperparams | None = None,
        kernel: str = KERNEL_SE, mean: str = MEAN_CONSTANT) -> GpModel:
    """Fit a GP to the training set.

    With explicit ``hyperparams`` only the factorization is computed;
    otherwise hyperparameters maximize the LML via a bounded multi-start
    pattern search (``cfg.n_starts`` random starts, ``cfg.budget``
    evaluations each).
    """
    if data.n < 1:
        raise StateError("cannot fit a GP to zero observations")
    X, y = data.X, data.residuals
    if hyperparams is not None:
        return _factorize(hyperparams, X, y, cfg)

    if rng is None:
        rng = np.random.default_rng(0)
    d = data.dim
    D2 = (X[:, None, :] - X[None, :, :]) ** 2

    log_ls = (math.log(cfg.length_scale_bounds[0]), math.log(cfg.length_scale_bounds[1]))
    log_sv = (math.log(cfg.signal_var_bounds[0]), math.log(cfg.signal_var_bounds[1]))
    log_nv = (math.log(max(cfg.noise_var_bounds[0], cfg.jitter)),
              math.log(cfg.noise_var_bounds[1]))
    y_scale = max(float(np.std(y)), 0.1)
    mean_lo, mean_hi = float(y.mean() - 3 * y_scale), float(y.mean() + 3 * y_scale)

    lo = [log_ls[0]] * d + [log_sv[0], log_nv[0]]
    hi = [log_ls[1]] * d + [log_sv[1], log_nv[1]]
    if mean == MEAN_CONSTANT:
        lo.append(mean_lo)
        hi.append(mean_hi)
    lo, hi = np.array(lo), np.array(hi)

    starts = rng.uniform(lo, hi, size=(cfg.n_starts, lo.size))

    def eval_fn(theta):
        return (-_lml_batch(D2, y, kernel, mean, theta),)

    theta_best, _, _ = multistart_pattern_search(
        eval_fn, starts, lo, hi, cfg.budget, step0=0.25 * (hi - lo))

    hyper = GpHyperparams(
        length_scales=np.exp(theta_best[:d]),
        signal_var=float(np.exp(theta_best[d])),
        noise_var=float(np.exp(theta_best[d + 1])),
        kernel=kernel,
        mean=mean,
        mean_value=float(theta_best[d + 2]) if mean == MEAN_CONSTANT else 0.0,
    )
    return _factorize(hyper, X, y, cfg)


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------

def predict_batch(model: GpModel, Xq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and (latent) variance at each query row."""
    Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
    if Xq.shape[1] != model.dim:
        raise ShapeError(f"query dim {Xq.shape[1]} != model dim {model.dim}")
    Ks = cross_kernel(model.hyper, Xq, model.X)
    mu = model.hyper.prior_mean + Ks @ model.alpha
    V = solve_triangular(model.chol, Ks.T, lower=True)
    var = np.maximum(model.hyper.signal_var - (V * V).sum(axis=0), 0.0)
    return mu, var


def predict(model: GpModel, x: np.ndarray) -> SurrogatePosterior:
    mu, var = predict_batch(model, np.asarray(x, dtype=float)[None, :])
    return SurrogatePosterior(mu=float(mu[0]), var=float(var[0]))


def corrected_predict(f_value: float, post: SurrogatePosterior) -> tuple[float, float]:
    """Bias-corrected predictor: mean f + mu_R, spread sqrt(var_R)."""
    return f_value + post.mu, math.sqrt(max(post.var, 0.0))


def log_marginal_likelihood(model: GpModel, data: TrainingSet | None = None) -> float:
    """LML of the fitted model, on its own data or on a provided set."""
    if data is not None:
        model = _factorize(model.hyper, data.X, data.residuals, FitConfig())
    resid = model.y - model.hyper.prior_mean
    logdet = 2.0 * float(np.log(np.diag(model.chol)).sum())
    return -0.5 * (float(resid @ model.alpha) + logdet + model.n * LOG_2PI)


# ---------------------------------------------------------------------------
# Model selection
# ---------------------------------------------------------------------------

DEFAULT_CANDIDATES = (
    (KERNEL_SE, MEAN_CONSTANT),
    (KERNEL_SE, MEAN_ZERO),
    (KERNEL_MATERN52, MEAN_CONSTANT),
    (KERNEL_MATERN52, MEAN_ZERO),
)


def bic(model: GpModel) -> float:
    return model.hyper.n_params * math.log(model.n) - 2.0 * log_marginal_likelihood(model)


def bic_select(data: TrainingSet, candidates=DEFAULT_CANDIDATES,
               cfg: FitConfig = FitConfig(),
               rng: np.random.Generator | None = None) -> GpModel:
    """Fit each (kernel, mean) candidate and keep the lowest BIC.

    Below 4 points selection is skipped and the default SE + constant-mean
    family is returned directly.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    if data.n < 4 or len(candidates) == 1:
        k, m = candidates[0] if len(candidates) == 1 else (KERNEL_SE, MEAN_CONSTANT)
        return fit(data, cfg, rng, kernel=k, mean=m)
    fitted = [fit(data, cfg, rng, kernel=k, mean=m) for k, m in candidates]
    scores = [bic(m) for m in fitted]
    return fitted[int(np.argmin(scores))]

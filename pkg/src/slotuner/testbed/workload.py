"""Workload descriptions: per-class offered load, flow sizes, burstiness.

Flow inter-arrival times are log-normal; sigma controls burstiness and the
location parameter is solved so the mean inter-arrival matches the offered
load. Flow sizes come from a named builtin distribution or an empirical
CDF (piecewise-linear, inverse-transform sampled).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError


@dataclass(frozen=True)
class EmpiricalCdf:
    """Piecewise-linear CDF over flow sizes in bytes."""

    sizes: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.sizes) != len(self.probs) or len(self.sizes) < 2:
            raise ConfigError("CDF needs >= 2 aligned (size, prob) points")
        if list(self.probs) != sorted(self.probs) or self.probs[-1] != 1.0:
            raise ConfigError("CDF probabilities must be nondecreasing and end at 1")
        if list(self.sizes) != sorted(self.sizes) or self.sizes[0] < 1:
            raise ConfigError("CDF sizes must be nondecreasing and >= 1 byte")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        u = rng.uniform(size=n)
        lo_p = self.probs[0]
        xs = np.interp(u, self.probs, self.sizes, left=self.sizes[0])
        return np.maximum(np.where(u <= lo_p, self.sizes[0], xs), 1.0)

    def mean(self) -> float:
        p = np.linspace(0.0, 1.0, 4097)
        q = np.interp(p, self.probs, self.sizes, left=self.sizes[0])
        return float(np.trapz(q, p))


# Desk-scale stand-ins for production size mixes: a short-flow-dominated
# search-style mix, a bimodal batch-style mix, and a narrow uniform control.
BUILTIN_FLOW_SIZES: dict[str, EmpiricalCdf] = {
    "web_search": EmpiricalCdf(
        sizes=(1_000, 5_000, 10_000, 30_000, 70_000, 200_000, 700_000,
               2_000_000, 10_000_000, 30_000_000),
        probs=(0.05, 0.25, 0.45, 0.65, 0.78, 0.88, 0.95, 0.98, 0.998, 1.0),
    ),
    "hadoop": EmpiricalCdf(
        sizes=(300, 1_000, 3_000, 20_000, 300_000, 2_000_000, 20_000_000,
               100_000_000),
        probs=(0.1, 0.4, 0.6, 0.75, 0.88, 0.95, 0.995, 1.0),
    ),
    "uniform_small": EmpiricalCdf(
        sizes=(10_000, 100_000),
        probs=(0.0, 1.0),
    ),
}


@dataclass(frozen=True)
class WorkloadSpec:
    """Per-class offered traffic on one bottleneck link."""

    loads_bps: tuple[float, ...]
    flow_sizes: str | EmpiricalCdf = "web_search"
    burstiness_sigma: float = 2.0
    class_labels: tuple[int, ...] = (10, 18, 26)
    base_rtt_s: float = 200e-6
    capacity_bps: float = 1e9

    def __post_init__(self):
        if len(self.loads_bps) != len(self.class_labels):
            raise ConfigError("one offered load per class label")
        if any(l < 0 for l in self.loads_bps):
            raise ConfigError("offered loads must be >= 0")
        if self.burstiness_sigma <= 0:
            raise ConfigError("burstiness sigma must be positive")
        if self.capacity_bps <= 0:
            raise ConfigError("link capacity must be positive")
        if isinstance(self.flow_sizes, str) and self.flow_sizes not in BUILTIN_FLOW_SIZES:
            raise ConfigError(f"unknown flow size distribution {self.flow_sizes!r}")

    @property
    def n_classes(self) -> int:
        return len(self.class_labels)

    @property
    def loads(self) -> np.ndarray:
        return np.asarray(self.loads_bps, dtype=float)

    @property
    def utilization(self) -> float:
        return float(self.loads.sum() / self.capacity_bps)

    def size_cdf(self) -> EmpiricalCdf:
        if isinstance(self.flow_sizes, EmpiricalCdf):
            return self.flow_sizes
        return BUILTIN_FLOW_SIZES[self.flow_sizes]


def generate_arrivals(w: WorkloadSpec, cls: int, duration_s: float,
                      rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Flow start times and sizes for one class over [0, duration).

    Log-normal inter-arrivals with the location parameter chosen so the
    expected byte rate matches the class's offered load.
    """
    load = w.loads[cls]
    if load <= 0:
        return np.empty(0), np.empty(0)
    cdf = w.size_cdf()
    mean_size_bits = cdf.mean() * 8.0
    mean_gap = mean_size_bits / load
    sigma = w.burstiness_sigma
    mu = math.log(mean_gap) - 0.5 * sigma * sigma

    # Draw in chunks until the horizon is covered.
    starts: list[np.ndarray] = []
    t = 0.0
    est = max(int(duration_s / mean_gap * 1.5) + 16, 16)
    while t < duration_s:
        gaps = rng.lognormal(mean=mu, sigma=sigma, size=est)
        cum = t + np.cumsum(gaps)
        starts.append(cum)
        t = float(cum[-1])
    times = np.concatenate(starts)
    times = times[times < duration_s]
    sizes = np.ceil(cdf.sample(rng, times.size))
    return times, sizes

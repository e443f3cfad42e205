"""Closed-loop, prediction-guided tuning of multi-class network parameters
against per-class tail-latency SLOs, plus a synthetic benchmark harness
with ground-truth systems, a deliberately biased fast model, and baseline
controllers for comparison and ablation."""

from importlib import resources

from .acquisition import ProposalConfig, TrustRegionSpec, expected_improvement, tr_penalty
from .controller import AblationFlags, Controller, ControllerConfig
from .denoiser import Denoiser, DenoiserConfig
from .harness import (
    RunSummary,
    ScenarioConfig,
    convergence_time,
    hindsight_regret,
    load_scenario,
    minmax_fairness,
    run_scenario,
)
from .objective import ObjectiveSpec, SloSpec, fairness, lse, objective, ratios
from .paramspace import (
    BlockSpec,
    DistanceSpec,
    ParamSpace,
    ParamVector,
    aitchison_distance,
    clr,
    denormalize,
    mixed_distance,
    normalize,
    softmax_map,
)
from .surrogate import (
    FitConfig,
    GpHyperparams,
    GpModel,
    SurrogatePosterior,
    TrainingSet,
    bic_select,
    corrected_predict,
    fit,
    gp_input,
    log_marginal_likelihood,
    predict,
)

__version__ = "0.1.0"


def scenario_path(name: str):
    """Filesystem path of a shipped scenario JSON (e.g. 'analytic-high-slo')."""
    if not name.endswith(".json"):
        name = name + ".json"
    return resources.files("slotuner").joinpath("scenarios", name)

"""Scenario-driven experiment runner.

A scenario JSON declares the parameter space, SLOs, objective constants,
controller choice and configuration, testbed, workload (or a phase
schedule of workloads), noise, model bias, iteration count, and seed.
Running it produces one CSV row per control iteration and a JSON summary
(convergence time, hindsight regret, min-max fairness, final objective).
Identical scenario + seed reproduces the trace byte for byte.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .acquisition import ProposalConfig, TrustRegionSpec
from .baselines import SelfTuneConfig, SelfTuneController, make_vanilla_bo
from .controller import AblationFlags, Controller, ControllerConfig, StepRecord
from .denoiser import DenoiserConfig
from .errors import ConfigError, DomainError, SlotunerError
from .objective import ObjectiveSpec, SloSpec
from .paramspace import (
    BlockSpec,
    DistanceSpec,
    ParamSpace,
    ParamVector,
    denormalize,
    normalize,
)
from .surrogate import FitConfig
from .testbed import (
    AnalyticModel,
    AnalyticSystem,
    BiasField,
    DesSystem,
    WorkloadSpec,
    read_flow_trace,
)

CONTROLLERS = ("polyphony", "selftune", "vanilla_bo")
TESTBEDS = ("analytic", "des", "trace_replay")
DEFAULT_CONVERGENCE_K = 3


# ---------------------------------------------------------------------------
# Scenario configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Phase:
    start: int
    workload: WorkloadSpec


@dataclass
class ScenarioConfig:
    name: str
    seed: int
    iterations: int
    controller: str
    testbed: str
    noise: float
    space: ParamSpace
    slo: SloSpec
    objective: ObjectiveSpec
    controller_config: ControllerConfig
    selftune: SelfTuneConfig
    bias: BiasField
    phases: tuple[Phase, ...]
    initial_config: ParamVector          # raw units
    sim_duration_s: float = 1.0
    trace_file: str | None = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iteration count must be >= 1")
        if self.controller not in CONTROLLERS:
            raise ConfigError(f"controller must be one of {CONTROLLERS}")
        if self.testbed not in TESTBEDS:
            raise ConfigError(f"testbed must be one of {TESTBEDS}")
        starts = [p.start for p in self.phases]
        if starts[0] != 0 or starts != sorted(starts) or len(set(starts)) != len(starts):
            raise ConfigError("phases must start at 0 and be ordered without overlap")

    def workload_at(self, iteration: int) -> WorkloadSpec:
        current = self.phases[0].workload
        for p in self.phases:
            if p.start <= iteration:
                current = p.workload
        return current


def _parse_workload(d: dict) -> WorkloadSpec:
    try:
        return WorkloadSpec(
            loads_bps=tuple(float(v) * 1e6 for v in d["loads_mbps"]),
            flow_sizes=d.get("flow_sizes", "web_search"),
            burstiness_sigma=float(d.get("sigma", 2.0)),
            class_labels=tuple(int(v) for v in d.get("class_labels", (10, 18, 26))),
            base_rtt_s=float(d.get("base_rtt_us", 200.0)) * 1e-6,
            capacity_bps=float(d.get("capacity_gbps", 1.0)) * 1e9,
        )
    except KeyError as exc:
        raise ConfigError(f"workload missing field {exc}") from exc


def _parse_space(d: dict) -> ParamSpace:
    blocks = []
    for b in d.get("blocks", []):
        kind = b.get("kind")
        labels = tuple(b.get("labels", ()))
        bounds = None
        if kind == "hypercube":
            bounds = tuple((float(lo), float(hi)) for lo, hi in b.get("bounds", ()))
        blocks.append(BlockSpec(kind=kind, labels=labels, bounds=bounds))
    return ParamSpace(blocks=tuple(blocks))


def _parse_controller_config(d: dict, n_classes: int) -> ControllerConfig:
    dist = DistanceSpec(alpha=float(d.get("alpha", 0.5)),
                        simplex_floor=float(d.get("simplex_floor", 1e-6)))
    tr = TrustRegionSpec(epsilon=float(d.get("epsilon", 0.3)),
                         beta=float(d.get("beta", 1e4)), distance=dist)
    prop = ProposalConfig(n_starts=int(d.get("n_starts", 64)),
                          local_budget=int(d.get("local_budget", 200)),
                          uniform_fraction=float(d.get("uniform_fraction", 0.5)))
    dn = d.get("denoiser", {})
    den = DenoiserConfig(window=int(dn.get("window", 8)),
                         sigma_max=float(dn.get("sigma_max", 3.0)),
                         v_ref=float(dn.get("v_ref", 0.2)),
                         v_off=float(dn.get("v_off", 0.01)))
    ft = d.get("fit", {})
    fit_cfg = FitConfig(n_starts=int(ft.get("n_starts", 8)),
                        budget=int(ft.get("budget", 200)))
    flags = AblationFlags.from_tokens(d.get("ablations", ()))
    return ControllerConfig(
        trust_region=tr, proposal=prop, denoiser=den, fit=fit_cfg,
        window_best=int(d.get("window_best", 20)),
        window_samples=int(d.get("window_samples", 64)),
        spike_factor=float(d.get("spike_factor", 1.5)),
        spike_count=int(d.get("spike_count", 2)),
        novelty_distance=float(d.get("novelty_distance", 0.02)),
        surprise_kappa=float(d.get("surprise_kappa", 1.0)),
        surprise_rel=float(d.get("surprise_rel", 0.05)),
        sigma0=float(d.get("sigma0", 0.1)),
        use_bic_selection=bool(d.get("bic_selection", False)),
        ablations=flags)


def load_scenario(source, overrides: dict | None = None) -> ScenarioConfig:
    """Build a ScenarioConfig from a JSON file path or an in-memory dict."""
    if isinstance(source, (str, Path)):
        try:
            raw = json.loads(Path(source).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}: invalid JSON ({exc})") from exc
    else:
        raw = dict(source)
    raw.update(overrides or {})

    if "param_space" not in raw or "slo" not in raw:
        raise ConfigError("scenario needs 'param_space' and 'slo'")

    space = _parse_space(raw["param_space"])
    slo_d = raw["slo"]
    slo = SloSpec(thresholds=tuple(float(v) for v in slo_d["thresholds"]),
                  labels=tuple(int(v) for v in slo_d.get("labels", ())))
    obj_d = raw.get("objective", {})
    obj = ObjectiveSpec(c=float(obj_d.get("c", 10.0)),
                        lam=float(obj_d.get("lambda", 0.5)))

    if "phases" in raw:
        phases = tuple(Phase(start=int(p["start"]), workload=_parse_workload(p["workload"]))
                       for p in raw["phases"])
    elif "workload" in raw:
        phases = (Phase(start=0, workload=_parse_workload(raw["workload"])),)
    else:
        raise ConfigError("scenario needs 'workload' or 'phases'")

    cc = _parse_controller_config(raw.get("controller_config", {}), slo.n_classes)
    cc = replace(cc, objective=obj)

    st_d = raw.get("selftune", {})
    st = SelfTuneConfig(delta=float(st_d.get("delta", 0.1)),
                        eta=float(st_d.get("eta", 0.01)),
                        beta_r=float(st_d.get("beta_r", 0.3)),
                        settle_factor=int(st_d.get("settle_factor", 2)))

    bias_d = raw.get("model_bias", {})
    bias = BiasField(b=tuple(bias_d["b"]) if "b" in bias_d else BiasField().b,
                     delta=tuple(bias_d["delta"]) if "delta" in bias_d else BiasField().delta)

    if "initial_config" not in raw:
        raise ConfigError("scenario needs 'initial_config' (flat raw values)")
    x0 = ParamVector.from_flat(space, [float(v) for v in raw["initial_config"]],
                               normalized=False)
    x0.validate(space)

    return ScenarioConfig(
        name=str(raw.get("name", "scenario")),
        seed=int(raw.get("seed", 0)),
        iterations=int(raw.get("iterations", 1)),
        controller=str(raw.get("controller", "polyphony")),
        testbed=str(raw.get("testbed", "analytic")),
        noise=float(raw.get("noise", 0.0)),
        space=space, slo=slo, objective=obj, controller_config=cc,
        selftune=st, bias=bias, phases=phases, initial_config=x0,
        sim_duration_s=float(raw.get("sim_duration_s", 1.0)),
        trace_file=raw.get("trace_file"))


# ---------------------------------------------------------------------------
# Per-iteration trace
# ---------------------------------------------------------------------------

@dataclass
class IterationTrace:
    iteration: int
    x_raw: np.ndarray
    raw_slis: np.ndarray
    smoothed_slis: np.ndarray
    g: float
    f: float
    residual: float
    g_best: float
    dist_to_best: float
    ei: float
    admitted: bool
    regime_shift: bool
    compliant: bool


def trace_columns(scenario: ScenarioConfig) -> list[str]:
    labels = scenario.space.labels
    cls = scenario.slo.labels or tuple(range(scenario.slo.n_classes))
    cols = ["iteration"]
    cols += [f"x_{l}" for l in labels]
    cols += [f"raw_d{c}" for c in cls]
    cols += [f"smoothed_d{c}" for c in cls]
    cols += ["g", "f", "residual", "g_best", "dist_to_best", "ei",
             "admitted", "regime_shift", "compliant"]
    return cols


def _fmt(v: float) -> str:
    return format(float(v), ".9g")


def trace_to_csv(traces: list[IterationTrace], scenario: ScenarioConfig) -> str:
    lines = [",".join(trace_columns(scenario))]
    for t in traces:
        parts = [str(t.iteration)]
        parts += [_fmt(v) for v in t.x_raw]
        parts += [_fmt(v) for v in t.raw_slis]
        parts += [_fmt(v) for v in t.smoothed_slis]
        parts += [_fmt(t.g), _fmt(t.f), _fmt(t.residual), _fmt(t.g_best),
                  _fmt(t.dist_to_best), _fmt(t.ei),
                  str(int(t.admitted)), str(int(t.regime_shift)), str(int(t.compliant))]
        lines.append(",".join(parts))
    return "\n".join(lines) + "\n"


def read_trace_csv(path) -> tuple[list[str], list[dict]]:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln]
    header = lines[0].split(",")
    rows = []
    for ln in lines[1:]:
        rows.append({k: float(v) for k, v in zip(header, ln.split(","))})
    return header, rows


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def convergence_time(compliance_flags, k_conv: int = DEFAULT_CONVERGENCE_K):
    """Index starting the first run of >= k_conv consecutive compliant steps."""
    if k_conv < 1:
        raise ConfigError("k_conv must be >= 1")
    flags = [bool(f) for f in compliance_flags]
    streak = 0
    for i, f in enumerate(flags):
        streak = streak + 1 if f else 0
        if streak == k_conv:
            return i - k_conv + 1
    return None


def hindsight_regret(gs, g_star: float, dt: float = 1.0) -> float:
    """Time integral of the objective above the hindsight-best value."""
    if dt <= 0:
        raise ConfigError("dt must be positive")
    gs = np.asarray(list(gs), dtype=float)
    return float(np.maximum(gs - g_star, 0.0).sum() * dt)


def minmax_fairness(r) -> float:
    """Smallest over largest SLO-normalized slowdown across classes."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0) or r.size == 0:
        raise DomainError("ratios must be positive")
    return float(r.min() / r.max())


@dataclass
class RunSummary:
    scenario: str
    controller: str
    ablations: list[str]
    iterations: int
    seed: int
    converged_at: int | None
    convergence_k: int
    regret: float
    regret_anchor: float
    fairness_final: float
    final_objective: float
    final_objective_last10: float
    phase_reconvergence: list
    wall_clock_s: float

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["converged_at"] = self.converged_at if self.converged_at is not None else "not converged"
        d["phase_reconvergence"] = [
            v if v is not None else "not converged" for v in self.phase_reconvergence]
        return d


def _ablation_tokens(flags: AblationFlags) -> list[str]:
    out = []
    if flags.no_trust_region:
        out.append("no_tr")
    if flags.no_correction:
        out.append("no_correction")
    if flags.no_model:
        out.append("no_model")
    if flags.no_denoiser:
        out.append("no_denoiser")
    return out


def summarize(traces: list[IterationTrace], scenario: ScenarioConfig,
              wall_clock_s: float, g_star: float | None = None,
              k_conv: int = DEFAULT_CONVERGENCE_K) -> RunSummary:
    flags = [t.compliant for t in traces]
    gs = [t.g for t in traces]
    anchor = min(gs) if g_star is None else g_star
    final_r = traces[-1].smoothed_slis / scenario.slo.as_array()
    starts = [p.start for p in scenario.phases] + [len(traces)]
    phase_conv = []
    for a, b in zip(starts[:-1], starts[1:]):
        phase_conv.append(convergence_time(flags[a:b], k_conv))
    last10 = gs[-10:] if len(gs) >= 10 else gs
    return RunSummary(
        scenario=scenario.name,
        controller=scenario.controller,
        ablations=_ablation_tokens(scenario.controller_config.ablations),
        iterations=len(traces),
        seed=scenario.seed,
        converged_at=convergence_time(flags, k_conv),
        convergence_k=k_conv,
        regret=hindsight_regret(gs, anchor),
        regret_anchor=anchor,
        fairness_final=minmax_fairness(final_r),
        final_objective=gs[-1],
        final_objective_last10=float(np.mean(last10)),
        phase_reconvergence=phase_conv,
        wall_clock_s=wall_clock_s)


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------

def build_system(scenario: ScenarioConfig, seed: int):
    if scenario.testbed == "analytic":
        return AnalyticSystem(scenario.space, scenario.noise, seed)
    if scenario.testbed == "des":
        return DesSystem(scenario.space, scenario.sim_duration_s, seed)
    if scenario.trace_file is None:
        raise ConfigError("trace_replay testbed needs 'trace_file'")
    replay = read_flow_trace(scenario.trace_file)
    return DesSystem(scenario.space, scenario.sim_duration_s, seed, replay=replay)


def build_controller(scenario: ScenarioConfig, rng: np.random.Generator):
    x0 = normalize(scenario.initial_config, scenario.space)
    cc = scenario.controller_config
    if scenario.controller == "selftune":
        return SelfTuneController(scenario.space, scenario.slo, scenario.selftune,
                                  x0, rng, objective_spec=scenario.objective)
    if scenario.controller == "vanilla_bo":
        return make_vanilla_bo(scenario.space, scenario.slo, cc, x0, rng)
    model = None
    if not cc.ablations.no_model:
        model = AnalyticModel(scenario.space, scenario.bias)
    return Controller(scenario.space, scenario.slo, cc, model, x0, rng)


def run_stem(scenario: ScenarioConfig) -> str:
    toks = _ablation_tokens(scenario.controller_config.ablations)
    suffix = ("-" + "-".join(toks)) if toks else ""
    return f"{scenario.name}__{scenario.controller}{suffix}"


def run_scenario(scenario: ScenarioConfig, out_dir=None,
                 k_conv: int = DEFAULT_CONVERGENCE_K):
    """Execute the loop; optionally write <stem>_trace.csv and <stem>_summary.json."""
    ss = np.random.SeedSequence(scenario.seed)
    sys_seed, ctrl_seed = ss.spawn(2)
    system = build_system(scenario, int(sys_seed.generate_state(1)[0]))
    controller = build_controller(scenario, np.random.default_rng(ctrl_seed))

    x_raw = denormalize(normalize(scenario.initial_config, scenario.space),
                        scenario.space)
    traces: list[IterationTrace] = []
    t0 = time.perf_counter()
    for t in range(scenario.iterations):
        workload = scenario.workload_at(t)
        try:
            raw_slis = system.evaluate(x_raw, workload)
            rec: StepRecord = controller.step(raw_slis, workload)
        except SlotunerError:
            prev = traces[-1] if traces else None
            traces.append(IterationTrace(
                iteration=t, x_raw=x_raw.flat(),
                raw_slis=np.full(scenario.slo.n_classes, np.nan),
                smoothed_slis=np.full(scenario.slo.n_classes, np.nan),
                g=float("nan"), f=float("nan"), residual=float("nan"),
                g_best=prev.g_best if prev else float("nan"),
                dist_to_best=0.0, ei=float("nan"),
                admitted=False, regime_shift=False, compliant=False))
            continue
        traces.append(IterationTrace(
            iteration=t, x_raw=x_raw.flat(), raw_slis=rec.raw_slis,
            smoothed_slis=rec.smoothed_slis, g=rec.g, f=rec.f,
            residual=rec.residual, g_best=rec.g_best,
            dist_to_best=rec.distance, ei=rec.ei, admitted=rec.admitted,
            regime_shift=rec.regime_shift, compliant=rec.compliant))
        x_raw = denormalize(rec.action, scenario.space)
    wall = time.perf_counter() - t0

    summary = summarize(traces, scenario, wall, k_conv=k_conv)
    trace_path = summary_path = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = run_stem(scenario)
        trace_path = out / f"{stem}_trace.csv"
        summary_path = out / f"{stem}_summary.json"
        trace_path.write_text(trace_to_csv(traces, scenario), encoding="utf-8")
        summary_path.write_text(json.dumps(summary.to_dict(), indent=2) + "\n",
                                encoding="utf-8")
    return traces, summary, trace_path, summary_path


# ---------------------------------------------------------------------------
# Recomputation from files (metrics / compare subcommands)
# ---------------------------------------------------------------------------

def summary_from_trace(trace_path, scenario: ScenarioConfig,
                       k_conv: int = DEFAULT_CONVERGENCE_K,
                       g_star: float | None = None) -> dict:
    header, rows = read_trace_csv(trace_path)
    cls = scenario.slo.labels or tuple(range(scenario.slo.n_classes))
    flags = [bool(int(r["compliant"])) for r in rows]
    gs = [r["g"] for r in rows]
    anchor = min(gs) if g_star is None else g_star
    smoothed = np.array([rows[-1][f"smoothed_d{c}"] for c in cls])
    starts = [p.start for p in scenario.phases] + [len(rows)]
    phase_conv = [convergence_time(flags[a:b], k_conv)
                  for a, b in zip(starts[:-1], starts[1:])]
    conv = convergence_time(flags, k_conv)
    last10 = gs[-10:] if len(gs) >= 10 else gs
    return {
        "scenario": scenario.name,
        "controller": scenario.controller,
        "ablations": _ablation_tokens(scenario.controller_config.ablations),
        "iterations": len(rows),
        "seed": scenario.seed,
        "converged_at": conv if conv is not None else "not converged",
        "convergence_k": k_conv,
        "regret": hindsight_regret(gs, anchor),
        "regret_anchor": anchor,
        "fairness_final": minmax_fairness(smoothed / scenario.slo.as_array()),
        "final_objective": gs[-1],
        "final_objective_last10": float(np.mean(last10)),
        "phase_reconvergence": [v if v is not None else "not converged"
                                for v in phase_conv],
    }


def compare_runs(directory, k_conv: int = DEFAULT_CONVERGENCE_K) -> dict:
    """Aggregate all <stem>_summary.json in a directory into one table.

    Hindsight regret is recomputed against the best objective achieved by
    any run in the set, mirroring how variants are compared head to head.
    """
    directory = Path(directory)
    pairs = []
    for summary_path in sorted(directory.glob("*_summary.json")):
        trace_path = summary_path.with_name(
            summary_path.name.replace("_summary.json", "_trace.csv"))
        if trace_path.exists():
            pairs.append((summary_path, trace_path))
    if not pairs:
        raise ConfigError(f"{directory}: no *_summary.json with matching traces")

    all_gs = {}
    for spath, tpath in pairs:
        _, rows = read_trace_csv(tpath)
        all_gs[spath] = [r["g"] for r in rows]
    g_star = min(min(gs) for gs in all_gs.values())

    table = {"g_star": g_star, "runs": []}
    for spath, tpath in pairs:
        summary = json.loads(spath.read_text(encoding="utf-8"))
        summary["regret"] = hindsight_regret(all_gs[spath], g_star)
        summary["regret_anchor"] = g_star
        table["runs"].append(summary)
    return table

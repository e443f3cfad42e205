"""Command-line interface.

    slotuner run <scenario.json> [--out-dir DIR] [--seed N]
                 [--controller polyphony|selftune|vanilla_bo]
                 [--ablate no_tr,no_correction,no_model,no_denoiser]
                 [--iterations N] [--figures]
    slotuner metrics <trace.csv> --slo <scenario.json> [--k N] [--out FILE]
    slotuner compare <dir> [--out FILE]
    slotuner report <trace.csv> --scenario <scenario.json> [--out-dir DIR]

Exit code 0 on success; nonzero with a diagnostic on configuration or
runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .controller import AblationFlags
from .errors import SlotunerError
from .harness import (
    compare_runs,
    load_scenario,
    run_scenario,
    summary_from_trace,
)


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slotuner",
                                description="Closed-loop SLO tuning benchmark harness")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario end to end")
    run.add_argument("scenario", help="scenario JSON file")
    run.add_argument("--out-dir", default="runs", help="output directory")
    run.add_argument("--seed", type=int, default=None, help="override the seed")
    run.add_argument("--controller", default=None,
                     choices=("polyphony", "selftune", "vanilla_bo"))
    run.add_argument("--ablate", default=None,
                     help="comma list: no_tr,no_correction,no_model,no_denoiser")
    run.add_argument("--iterations", type=int, default=None)
    run.add_argument("--figures", action="store_true",
                     help="render PNG figures next to the trace")

    met = sub.add_parser("metrics", help="recompute a summary from a trace CSV")
    met.add_argument("trace", help="trace CSV file")
    met.add_argument("--slo", required=True, help="scenario JSON (for thresholds/phases)")
    met.add_argument("--k", type=int, default=3, help="consecutive compliant steps")
    met.add_argument("--out", default=None, help="write JSON here instead of stdout")

    cmp_ = sub.add_parser("compare", help="aggregate run summaries in a directory")
    cmp_.add_argument("directory")
    cmp_.add_argument("--out", default=None)

    rep = sub.add_parser("report", help="render figures for a trace CSV")
    rep.add_argument("trace")
    rep.add_argument("--scenario", required=True)
    rep.add_argument("--out-dir", default=None)
    return p


def _cmd_run(args) -> int:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.controller is not None:
        overrides["controller"] = args.controller
    if args.iterations is not None:
        overrides["iterations"] = args.iterations
    scenario = load_scenario(args.scenario, overrides)
    if args.ablate:
        flags = AblationFlags.from_tokens(args.ablate.split(","))
        cc = replace(scenario.controller_config, ablations=flags)
        scenario.controller_config = cc
    traces, summary, trace_path, summary_path = run_scenario(
        scenario, out_dir=args.out_dir)
    print(f"wrote {trace_path}")
    print(f"wrote {summary_path}")
    if args.figures:
        from .report import render_run
        for path in render_run(trace_path, scenario, args.out_dir):
            print(f"wrote {path}")
    conv = summary.converged_at
    print(f"converged_at={conv if conv is not None else 'not converged'} "
          f"regret={summary.regret:.4g} fairness={summary.fairness_final:.4g} "
          f"final_objective={summary.final_objective:.4g}")
    return 0


def _cmd_metrics(args) -> int:
    scenario = load_scenario(args.slo)
    summary = summary_from_trace(args.trace, scenario, k_conv=args.k)
    text = json.dumps(summary, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def _cmd_compare(args) -> int:
    table = compare_runs(args.directory)
    text = json.dumps(table, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def _cmd_report(args) -> int:
    from .report import render_run
    scenario = load_scenario(args.scenario)
    for path in render_run(args.trace, scenario, args.out_dir):
        print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "metrics":
            return _cmd_metrics(args)
        if args.command == "compare":
            return _cmd_compare(args)
        if args.command == "report":
            return _cmd_report(args)
    except SlotunerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 1


if __name__ == "__main__":
    sys.exit(main())

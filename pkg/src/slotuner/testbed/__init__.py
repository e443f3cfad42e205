"""Ground-truth systems and fast models for the closed loop.

Three interchangeable "systems" produce per-class p99 FCT slowdowns for a
configuration: a deterministic analytic formula with controllable noise
(the benchmark workhorse), a discrete-event simulation of a multi-class
weighted bottleneck link, and the DES replaying flows from a trace file.
The fast "model" is the analytic formula with deliberately perturbed
constants, standing in for an imperfect external predictor.
"""

from .analytic import (
    AnalyticModel,
    AnalyticSystem,
    BiasField,
    analytic_model_predict,
    analytic_system_evaluate,
)
from .des import DesSystem, SystemResponse, des_simulate
from .trace import FlowRecord, ReplayWorkload, read_flow_trace, write_flow_trace
from .workload import BUILTIN_FLOW_SIZES, EmpiricalCdf, WorkloadSpec

__all__ = [
    "AnalyticModel",
    "AnalyticSystem",
    "BiasField",
    "analytic_model_predict",
    "analytic_system_evaluate",
    "DesSystem",
    "SystemResponse",
    "des_simulate",
    "FlowRecord",
    "ReplayWorkload",
    "read_flow_trace",
    "write_flow_trace",
    "BUILTIN_FLOW_SIZES",
    "EmpiricalCdf",
    "WorkloadSpec",
]

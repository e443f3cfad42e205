"""Discrete-event simulation of one multi-class bottleneck link.

Per-class FIFO queues are served by deficit-weighted round robin with
quanta proportional to the configured weights. Transfers are window-paced
at packet granularity: a flow injects min(cwnd, remaining) packets per
round, reacts to the fraction of the round's packets that saw queue depth
above its class's marking threshold by shrinking its window
multiplicatively (additive growth otherwise), and completes when its last
byte is delivered. Slowdown = FCT / (size/capacity + base RTT); the
timeline charges half an RTT before the first enqueue and half after the
last departure, so an uncontended single-round flow scores exactly 1.

This is a fluid/window transport abstraction, not per-packet TCP: the
goal is a responsive, deterministic ground truth, not protocol fidelity.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from heapq import heapify, heappop, heappush

import numpy as np

from ..errors import ConfigError, NumericError
from ..paramspace import ParamSpace, ParamVector
from .analytic import knob_layout
from .trace import FlowRecord, ReplayWorkload
from .workload import WorkloadSpec, generate_arrivals

MSS = 1500
MIN_WEIGHT = 0.01
QUANTUM_BASE = 3 * MSS
MIN_FLOWS_PER_CLASS = 200


@dataclass
class SystemResponse:
    """Per-class p99 slowdowns plus completion bookkeeping."""

    slis: np.ndarray
    flow_counts: np.ndarray
    low_sample: bool = False
    records: list[FlowRecord] | None = None


def _knobs(x_raw: ParamVector, space: ParamSpace):
    w_sl, k_sl, c_sl = knob_layout(space)
    flat = x_raw.flat()
    weights = np.maximum(flat[w_sl], MIN_WEIGHT)
    weights = weights / weights.sum()
    k_bytes = flat[k_sl] * 1024.0          # raw marking thresholds are in KB
    cwnd0 = np.maximum(flat[c_sl], 1.0)    # raw initial windows are in packets
    return weights, k_bytes, cwnd0


def des_simulate(x_raw: ParamVector, space: ParamSpace, workload: WorkloadSpec,
                 duration_s: float, seed: int, collect_records: bool = False,
                 replay: ReplayWorkload | None = None) -> SystemResponse:
    """Simulate the bottleneck for ``duration_s`` of arrivals and drain."""
    if workload.capacity_bps <= 0:
        raise ConfigError("link capacity must be positive")
    weights, k_bytes, cwnd0 = _knobs(x_raw, space)
    n_cls = workload.n_classes
    cap = workload.capacity_bps
    rtt = workload.base_rtt_s
    half_rtt = 0.5 * rtt

    # Flow population: generated from the workload law, or replayed.
    starts: list[float] = []
    sizes: list[int] = []
    classes: list[int] = []
    if replay is not None:
        label_to_idx = {lbl: i for i, lbl in enumerate(workload.class_labels)}
        for rec in replay.records:
            if rec.dscp not in label_to_idx:
                raise ConfigError(f"trace DSCP {rec.dscp} not among {workload.class_labels}")
            starts.append(rec.start_ns * 1e-9)
            sizes.append(rec.bytes)
            classes.append(label_to_idx[rec.dscp])
    else:
        children = np.random.SeedSequence(seed).spawn(n_cls)
        for c in range(n_cls):
            t, s = generate_arrivals(workload, c, duration_s, np.random.default_rng(children[c]))
            starts.extend(t.tolist())
            sizes.extend(int(v) for v in s.tolist())
            classes.extend([c] * t.size)
    if not starts:
        raise ConfigError("workload produced no flows")

    n_flows = len(starts)
    unsent = [int(s) for s in sizes]
    outstanding = [0] * n_flows
    round_sent = [0] * n_flows
    round_marked = [0] * n_flows
    cwnd = [float(cwnd0[classes[i]]) for i in range(n_flows)]

    queues = [deque() for _ in range(n_cls)]
    qbytes = [0.0] * n_cls
    deficit = [0.0] * n_cls
    quantum = [max(1.0, float(w) * QUANTUM_BASE) for w in weights]
    ptr = 0
    quantum_added = False
    backlog = 0

    slowdowns: list[list[float]] = [[] for _ in range(n_cls)]
    records: list[FlowRecord] | None = [] if collect_records else None
    seq = 0
    heap: list[tuple[float, int, int]] = []
    for i in range(n_flows):
        heap.append((starts[i] + half_rtt, seq, i))
        seq += 1
    heapify(heap)

    bits_per_byte_over_cap = 8.0 / cap
    time_cap = duration_s * 20.0 + 1000.0 * rtt + 1.0
    link_free = 0.0
    truncated = False

    def inject_round(fi: int) -> int:
        nonlocal backlog
        c = classes[fi]
        w = max(1, int(cwnd[fi]))
        kb = k_bytes[c]
        q = queues[c]
        sent = 0
        while sent < w and unsent[fi] > 0:
            b = unsent[fi] if unsent[fi] < MSS else MSS
            unsent[fi] -= b
            q.append((fi, b, qbytes[c] > kb))
            qbytes[c] += b
            sent += 1
        outstanding[fi] = sent
        round_sent[fi] = sent
        round_marked[fi] = 0
        backlog += sent
        return sent

    while heap or backlog:
        if backlog == 0:
            t, _, fi = heappop(heap)
            if t > time_cap:
                truncated = True
                break
            if t > link_free:
                link_free = t
            inject_round(fi)
            continue
        if heap and heap[0][0] <= link_free:
            _, _, fi = heappop(heap)
            inject_round(fi)
            continue

        # Pick the next packet: deficit-weighted round robin.
        guard = 0
        while True:
            guard += 1
            if guard > 1_000_000:
                raise NumericError("DWRR scheduler failed to make progress")
            q = queues[ptr]
            if not q:
                deficit[ptr] = 0.0
                ptr = (ptr + 1) % n_cls
                quantum_added = False
                continue
            if not quantum_added:
                deficit[ptr] += quantum[ptr]
                quantum_added = True
            head_bytes = q[0][1]
            if deficit[ptr] >= head_bytes:
                fi, b, marked = q.popleft()
                deficit[ptr] -= b
                qbytes[ptr] -= b
                if not q:
                    deficit[ptr] = 0.0
                    ptr = (ptr + 1) % n_cls
                    quantum_added = False
                break
            ptr = (ptr + 1) % n_cls
            quantum_added = False

        backlog -= 1
        link_free += b * bits_per_byte_over_cap
        if marked:
            round_marked[fi] += 1
        outstanding[fi] -= 1
        if outstanding[fi] == 0:
            frac = round_marked[fi] / round_sent[fi]
            if frac > 0.0:
                cwnd[fi] = max(1.0, cwnd[fi] * (1.0 - 0.5 * frac))
            else:
                cwnd[fi] += 1.0
            if unsent[fi] == 0:
                c = classes[fi]
                fct = link_free + half_rtt - starts[fi]
                ideal = sizes[fi] * bits_per_byte_over_cap + rtt
                slowdowns[c].append(fct / ideal)
                if records is not None:
                    records.append(FlowRecord(
                        start_ns=int(round(starts[fi] * 1e9)),
                        end_ns=int(round((starts[fi] + fct) * 1e9)),
                        src=100 + c, dst=1,
                        sport=10000 + (fi % 50000), dport=80,
                        dscp=workload.class_labels[c], bytes=sizes[fi]))

        if link_free > time_cap:
            truncated = True
            break

    counts = np.array([len(s) for s in slowdowns])
    slis = np.array([float(np.percentile(s, 99)) if s else 1.0 for s in slowdowns])
    low = truncated or any(
        counts[c] < MIN_FLOWS_PER_CLASS
        for c in range(n_cls) if workload.loads[c] > 0 and replay is None)
    return SystemResponse(slis=slis, flow_counts=counts, low_sample=low,
                          records=records)


class DesSystem:
    """Closed-loop adapter: one DES run per controller step."""

    def __init__(self, space: ParamSpace, duration_s: float, seed: int,
                 replay: ReplayWorkload | None = None):
        self.space = space
        self.duration_s = duration_s
        self.seed = seed
        self.replay = replay
        self._step = 0
        self.last_response: SystemResponse | None = None

    def evaluate(self, x_raw: ParamVector, workload: WorkloadSpec) -> np.ndarray:
        step_seed = np.random.SeedSequence((self.seed, self._step)).generate_state(1)[0]
        self._step += 1
        resp = des_simulate(x_raw, self.space, workload, self.duration_s,
                            int(step_seed), replay=self.replay)
        self.last_response = resp
        return resp.slis

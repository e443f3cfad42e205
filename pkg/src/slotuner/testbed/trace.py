"""Flow-trace files: the offline stand-in for live workload measurement.

Format: UTF-8 CSV with header ``start_ns,end_ns,src,dst,sport,dport,dscp,bytes``
and one integer-valued record per line.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError, ParseError, RangeError

TRACE_HEADER = "start_ns,end_ns,src,dst,sport,dport,dscp,bytes"
_FIELDS = TRACE_HEADER.split(",")


@dataclass(frozen=True)
class FlowRecord:
    start_ns: int
    end_ns: int
    src: int
    dst: int
    sport: int
    dport: int
    dscp: int
    bytes: int

    def __post_init__(self):
        if self.end_ns < self.start_ns:
            raise RangeError("flow record ends before it starts")
        if self.bytes < 1:
            raise RangeError("flow record must carry at least one byte")


@dataclass(frozen=True)
class ReplayWorkload:
    """Parsed trace ready for replay, with per-class byte accounting."""

    records: tuple[FlowRecord, ...]

    @property
    def dscp_values(self) -> tuple[int, ...]:
        return tuple(sorted({r.dscp for r in self.records}))

    def class_counts(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for r in self.records:
            out[r.dscp] = out.get(r.dscp, 0) + 1
        return out

    def class_bytes(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for r in self.records:
            out[r.dscp] = out.get(r.dscp, 0) + r.bytes
        return out

    @property
    def duration_s(self) -> float:
        if not self.records:
            return 0.0
        t0 = min(r.start_ns for r in self.records)
        t1 = max(r.end_ns for r in self.records)
        return max((t1 - t0) * 1e-9, 1e-9)

    def loads_bps(self, class_labels) -> np.ndarray:
        per_class = self.class_bytes()
        dur = self.duration_s
        return np.array([per_class.get(lbl, 0) * 8.0 / dur for lbl in class_labels])


def read_flow_trace(path) -> ReplayWorkload:
    """Parse a trace file; malformed lines name their line number."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines()]
    if not lines:
        raise ConfigError(f"{path}: empty trace file")
    if lines[0].strip() != TRACE_HEADER:
        raise ParseError(f"{path}:1: expected header {TRACE_HEADER!r}")
    records = []
    for no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(_FIELDS):
            raise ParseError(f"{path}:{no}: expected {len(_FIELDS)} fields, got {len(parts)}")
        try:
            values = [int(p) for p in parts]
            records.append(FlowRecord(*values))
        except (ValueError, RangeError) as exc:
            raise ParseError(f"{path}:{no}: {exc}") from exc
    if not records:
        raise ConfigError(f"{path}: trace has a header but no records")
    return ReplayWorkload(records=tuple(records))


def write_flow_trace(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(TRACE_HEADER + "\n")
        for r in records:
            fh.write(f"{r.start_ns},{r.end_ns},{r.src},{r.dst},"
                     f"{r.sport},{r.dport},{r.dscp},{r.bytes}\n")

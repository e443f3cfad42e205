"""Mixed hypercube/simplex parameter space and its geometry.

A configuration is an ordered list of blocks. Hypercube blocks hold
independent knobs with physical bounds (e.g. marking thresholds in KB,
initial windows in packets) and are affinely scaled to [0,1] for
optimization. Simplex blocks hold allocations (e.g. per-class switch
weights): non-negative, summing to one.

Distances combine a Euclidean term over normalized hypercube coordinates
with an Aitchison (centered log-ratio) term over each simplex block:

    d(x, y) = sqrt(||h_x - h_y||^2 + alpha * sum_l d_A(u_x^l, u_y^l)^2)

The clr transform diverges at zero components, so simplex points are
clamped to a small floor and renormalized before any log-ratio operation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, RangeError, ShapeError

HYPERCUBE = "hypercube"
SIMPLEX = "simplex"

SIMPLEX_SUM_TOL = 1e-9


@dataclass(frozen=True)
class BlockSpec:
    """One block of the parameter space: a hypercube or a simplex."""

    kind: str
    labels: tuple[str, ...]
    bounds: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.kind not in (HYPERCUBE, SIMPLEX):
            raise ShapeError(f"unknown block kind {self.kind!r}")
        if self.dim < 1:
            raise ShapeError("block must have at least one coordinate")
        if self.kind == SIMPLEX:
            if self.dim < 2:
                raise ShapeError("simplex blocks need dim >= 2")
            if self.bounds is not None:
                raise ShapeError("simplex blocks take no bounds")
        else:
            if self.bounds is None or len(self.bounds) != self.dim:
                raise ShapeError("hypercube blocks need one (lo, hi) per coordinate")
            for label, (lo, hi) in zip(self.labels, self.bounds):
                if not lo < hi:
                    raise RangeError(f"coordinate {label!r}: need lo < hi, got ({lo}, {hi})")

    @property
    def dim(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class ParamSpace:
    """Ordered, immutable list of blocks; flattening order is fixed."""

    blocks: tuple[BlockSpec, ...]

    def __post_init__(self):
        if not self.blocks:
            raise ShapeError("parameter space needs at least one block")

    @property
    def dim(self) -> int:
        return sum(b.dim for b in self.blocks)

    @property
    def hypercube_dim(self) -> int:
        return sum(b.dim for b in self.blocks if b.kind == HYPERCUBE)

    @property
    def labels(self) -> tuple[str, ...]:
        out: list[str] = []
        for b in self.blocks:
            out.extend(b.labels)
        return tuple(out)

    def block_slices(self) -> list[slice]:
        """Slice of each block within the flattened vector."""
        slices, start = [], 0
        for b in self.blocks:
            slices.append(slice(start, start + b.dim))
            start += b.dim
        return slices


@dataclass(frozen=True)
class DistanceSpec:
    """Weights for the mixed hypercube/simplex distance."""

    alpha: float = 0.5
    simplex_floor: float = 1e-6

    def __post_init__(self):
        if self.alpha < 0:
            raise RangeError("alpha must be >= 0")
        if not 0 < self.simplex_floor < 1:
            raise RangeError("simplex_floor must lie in (0, 1)")


class ParamVector:
    """A point in a ParamSpace, as one value array per block.

    Hypercube blocks may hold raw (physical-unit) or normalized [0,1]
    values; ``normalized`` records which. Simplex blocks are identical in
    both forms and are validated to sum to one on construction.
    """

    __slots__ = ("blocks", "normalized")

    def __init__(self, blocks, normalized: bool):
        self.blocks = tuple(np.asarray(b, dtype=float) for b in blocks)
        self.normalized = normalized

    @classmethod
    def from_flat(cls, space: ParamSpace, values, normalized: bool) -> "ParamVector":
        values = np.asarray(values, dtype=float)
        if values.shape != (space.dim,):
            raise ShapeError(f"expected {space.dim} values, got {values.shape}")
        return cls([values[s] for s in space.block_slices()], normalized)

    def flat(self) -> np.ndarray:
        return np.concatenate(self.blocks)

    def copy(self) -> "ParamVector":
        return ParamVector([b.copy() for b in self.blocks], self.normalized)

    def validate(self, space: ParamSpace) -> None:
        if len(self.blocks) != len(space.blocks):
            raise ShapeError("block count does not match space")
        for vals, spec in zip(self.blocks, space.blocks):
            if vals.shape != (spec.dim,):
                raise ShapeError(f"block {spec.labels}: expected {spec.dim} values")
            if spec.kind == SIMPLEX:
                if np.any(vals < -SIMPLEX_SUM_TOL):
                    raise RangeError(f"simplex block {spec.labels} has negative component")
                if abs(vals.sum() - 1.0) > SIMPLEX_SUM_TOL:
                    raise RangeError(f"simplex block {spec.labels} does not sum to 1")

    def __repr__(self):
        tag = "normalized" if self.normalized else "raw"
        return f"ParamVector({tag}, {[np.round(b, 6).tolist() for b in self.blocks]})"


def normalize(x: ParamVector, space: ParamSpace) -> ParamVector:
    """Affinely map raw hypercube coordinates to [0,1]; simplex blocks pass through."""
    if x.normalized:
        return x.copy()
    x.validate(space)
    out = []
    for vals, spec in zip(x.blocks, space.blocks):
        if spec.kind == SIMPLEX:
            out.append(vals.copy())
            continue
        scaled = np.empty_like(vals)
        for i, (label, (lo, hi)) in enumerate(zip(spec.labels, spec.bounds)):
            if not lo <= vals[i] <= hi:
                raise RangeError(f"coordinate {label!r}: {vals[i]} outside [{lo}, {hi}]")
            scaled[i] = (vals[i] - lo) / (hi - lo)
        out.append(scaled)
    return ParamVector(out, normalized=True)


def denormalize(x: ParamVector, space: ParamSpace) -> ParamVector:
    """Exact inverse of :func:`normalize`."""
    if not x.normalized:
        return x.copy()
    x.validate(space)
    out = []
    for vals, spec in zip(x.blocks, space.blocks):
        if spec.kind == SIMPLEX:
            out.append(vals.copy())
            continue
        raw = np.empty_like(vals)
        for i, (label, (lo, hi)) in enumerate(zip(spec.labels, spec.bounds)):
            if not -1e-12 <= vals[i] <= 1 + 1e-12:
                raise RangeError(f"coordinate {label!r}: {vals[i]} outside [0, 1]")
            raw[i] = lo + min(max(vals[i], 0.0), 1.0) * (hi - lo)
        out.append(raw)
    return ParamVector(out, normalized=False)


def softmax_map(z) -> np.ndarray:
    """Map unconstrained reals onto the simplex (max-shifted for stability)."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size < 2:
        raise ShapeError("softmax_map needs a 1-d vector with dim >= 2")
    if not np.all(np.isfinite(z)):
        raise NumericError("softmax_map: non-finite input")
    e = np.exp(z - z.max())
    return e / e.sum()


def _clamped(u, floor: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    u = np.maximum(u, floor)
    return u / u.sum()


def clr(u, floor: float = 1e-6) -> np.ndarray:
    """Centered log-ratio transform; components below ``floor`` are clamped."""
    lu = np.log(_clamped(u, floor))
    return lu - lu.mean()


def aitchison_distance(u, v, floor: float = 1e-6) -> float:
    """Euclidean norm of clr(u) - clr(v)."""
    return float(np.linalg.norm(clr(u, floor) - clr(v, floor)))


def mixed_distance(x: ParamVector, y: ParamVector, space: ParamSpace,
                   spec: DistanceSpec = DistanceSpec()) -> float:
    """Combined hypercube/simplex separation between two normalized points."""
    if len(x.blocks) != len(space.blocks) or len(y.blocks) != len(space.blocks):
        raise ShapeError("vectors do not match the parameter space")
    sq = 0.0
    for xb, yb, b in zip(x.blocks, y.blocks, space.blocks):
        if xb.shape != (b.dim,) or yb.shape != (b.dim,):
            raise ShapeError(f"block {b.labels}: dimension mismatch")
        if b.kind == HYPERCUBE:
            diff = xb - yb
            sq += float(diff @ diff)
        else:
            sq += spec.alpha * aitchison_distance(xb, yb, spec.simplex_floor) ** 2
    return float(np.sqrt(sq))


# ---------------------------------------------------------------------------
# Unconstrained pre-image used by the acquisition optimizer and baselines
# ---------------------------------------------------------------------------

def to_preimage(x: ParamVector, space: ParamSpace, floor: float = 1e-6) -> np.ndarray:
    """Embed a normalized point into unconstrained coordinates.

    Hypercube coordinates pass through; each simplex block becomes its clr
    vector, which is a section of softmax (softmax(clr(u)) == u).
    """
    parts = []
    for vals, b in zip(x.blocks, space.blocks):
        parts.append(vals if b.kind == HYPERCUBE else clr(vals, floor))
    return np.concatenate(parts)


def from_preimage(z: np.ndarray, space: ParamSpace) -> ParamVector:
    """Inverse of :func:`to_preimage`: clamp hypercube coords, softmax logits."""
    z = np.asarray(z, dtype=float)
    if z.shape != (space.dim,):
        raise ShapeError(f"expected {space.dim} pre-image coords, got {z.shape}")
    blocks = []
    for s, b in zip(space.block_slices(), space.blocks):
        if b.kind == HYPERCUBE:
            blocks.append(np.clip(z[s], 0.0, 1.0))
        else:
            blocks.append(softmax_map(z[s]))
    return ParamVector(blocks, normalized=True)


def calibrate_alpha(space: ParamSpace, n_samples: int = 2000, seed: int = 0,
                    floor: float = 1e-6) -> float:
    """Alpha making the expected simplex term match the expected hypercube term
    under uniform sampling of the space. Returns 0.5 when either part is absent.
    """
    rng = np.random.default_rng(seed)
    hyp_sq, simp_sq = [], []
    for _ in range(n_samples):
        h_acc = s_acc = 0.0
        has_h = has_s = False
        for b in space.blocks:
            if b.kind == HYPERCUBE:
                d = rng.uniform(size=b.dim) - rng.uniform(size=b.dim)
                h_acc += float(d @ d)
                has_h = True
            else:
                u = rng.dirichlet(np.ones(b.dim))
                v = rng.dirichlet(np.ones(b.dim))
                s_acc += aitchison_distance(u, v, floor) ** 2
                has_s = True
        if has_h:
            hyp_sq.append(h_acc)
        if has_s:
            simp_sq.append(s_acc)
    if not hyp_sq or not simp_sq:
        return 0.5
    return float(np.mean(hyp_sq) / np.mean(simp_sq))

"""Derivative-free multi-start pattern search with batched evaluation.

All starts advance in lock step: each polling round gathers the +/- step
pokes of every active start into one array so the caller's objective can
be evaluated vectorized. Candidates are compared by a lexicographic key
(tuple of float arrays, minimized component-wise with a small tie
tolerance), which lets callers express tie-breaking rules without a
second optimization pass.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

KEY_DECIMALS = 12


def _key_tuple(keys: Sequence[np.ndarray], i: int) -> tuple:
    out = []
    for k in keys:
        v = float(k[i])
        out.append(round(v, KEY_DECIMALS) if np.isfinite(v) else np.inf)
    return tuple(out)


def _sanitize(keys) -> list[np.ndarray]:
    out = []
    for k in keys:
        k = np.asarray(k, dtype=float).copy()
        k[~np.isfinite(k)] = np.inf
        out.append(k)
    return out


def multistart_pattern_search(
    eval_fn: Callable[[np.ndarray], Sequence[np.ndarray]],
    starts: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    budget_per_start: int,
    step0: np.ndarray,
    step_min_frac: float = 1e-3,
) -> tuple[np.ndarray, tuple, int]:
    """Minimize ``eval_fn`` from several starts inside a box.

    eval_fn maps an (M, D) candidate array to a sequence of (M,) key
    arrays, compared lexicographically. Each start spends at most
    ``budget_per_start`` evaluations; a failed polling round halves that
    start's step. Returns (best point, best key, start index); wholly
    deterministic for fixed inputs.
    """
    centers = np.clip(np.asarray(starts, dtype=float), lo, hi)
    n_starts, dim = centers.shape
    step0 = np.broadcast_to(np.asarray(step0, dtype=float), (dim,)).copy()

    keys0 = _sanitize(eval_fn(centers))
    best_keys = [_key_tuple(keys0, s) for s in range(n_starts)]
    budget = np.full(n_starts, budget_per_start - 1)
    frac = np.ones(n_starts)

    poll_cost = 2 * dim
    while True:
        active = np.flatnonzero((budget >= poll_cost) & (frac >= step_min_frac))
        if active.size == 0:
            break
        pokes = np.empty((active.size, poll_cost, dim))
        for a, s in enumerate(active):
            offs = np.concatenate([np.diag(step0 * frac[s]), -np.diag(step0 * frac[s])])
            pokes[a] = centers[s] + offs
        flat = np.clip(pokes.reshape(-1, dim), lo, hi)
        keys = _sanitize(eval_fn(flat))
        for a, s in enumerate(active):
            base = a * poll_cost
            cand = min(range(poll_cost), key=lambda j: _key_tuple(keys, base + j))
            ck = _key_tuple(keys, base + cand)
            if ck < best_keys[s]:
                best_keys[s] = ck
                centers[s] = flat[base + cand]
            else:
                frac[s] *= 0.5
            budget[s] -= poll_cost

    winner = min(range(n_starts), key=lambda s: (best_keys[s], s))
    return centers[winner], best_keys[winner], winner

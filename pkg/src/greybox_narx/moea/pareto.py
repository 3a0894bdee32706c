"""Pareto dominance utilities on objective matrices (minimisation)."""

from __future__ import annotations

import numpy as np

from ..estimation import PENALTY


def _vec(a) -> np.ndarray:
    if hasattr(a, "as_tuple"):
        a = a.as_tuple()
    return np.asarray(a, dtype=float)


def dominates(a, b) -> bool:
    """``a`` is no worse than ``b`` everywhere and strictly better somewhere."""
    a, b = _vec(a), _vec(b)
    if a.shape != b.shape:
        raise ValueError("objective vectors differ in arity")
    return bool(np.all(a <= b) and np.any(a < b))


def weakly_dominates(a, b) -> bool:
    a, b = _vec(a), _vec(b)
    return bool(np.all(a <= b))


def dominance_matrix(F: np.ndarray) -> np.ndarray:
    """``D[i, j]`` is True when row ``i`` dominates row ``j``."""
    F = np.asarray(F, dtype=float)
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    return le & lt


def nondominated_mask(F) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    if len(F) == 0:
        return np.zeros(0, dtype=bool)
    return ~dominance_matrix(F).any(axis=0)


def fast_non_dominated_sort(F) -> tuple[list[np.ndarray], np.ndarray]:
    """Partition rows of ``F`` into successive non-dominated fronts.

    Returns the list of fronts (index arrays) and the rank of every row.
    """
    F = np.asarray(F, dtype=float)
    n = len(F)
    D = dominance_matrix(F)
    dominated_count = D.sum(axis=0)
    rank = np.full(n, -1, dtype=int)
    fronts = []
    current = np.flatnonzero(dominated_count == 0)
    r = 0
    while current.size:
        rank[current] = r
        fronts.append(current)
        dominated_count = dominated_count - D[current].sum(axis=0)
        dominated_count[rank >= 0] = -1
        current = np.flatnonzero(dominated_count == 0)
        r += 1
    return fronts, rank


def normalize_objectives(F) -> np.ndarray:
    """Scale each objective to [0, 1] over its non-penalty values.

    Penalised entries are placed at 2 so they stay apart from the feasible
    region without collapsing its spread.
    """
    F = np.asarray(F, dtype=float)
    out = np.zeros_like(F)
    for j in range(F.shape[1]):
        col = F[:, j]
        ok = col < PENALTY
        if ok.any():
            lo, hi = col[ok].min(), col[ok].max()
            out[ok, j] = (col[ok] - lo) / (hi - lo) if hi > lo else 0.0
        out[~ok, j] = 2.0
    return out


def crowding_distance(F) -> np.ndarray:
    """Crowding distance of each row within one front (boundary rows get inf)."""
    F = normalize_objectives(F)
    n, m = F.shape
    dist = np.zeros(n)
    if n <= 2:
        dist[:] = np.inf
        return dist
    for j in range(m):
        order = np.argsort(F[:, j], kind="stable")
        col = F[order, j]
        span = col[-1] - col[0]
        dist[order[0]] = dist[order[-1]] = np.inf
        if span > 0:
            dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist


def hypervolume(F, reference) -> float:
    """Exact hypervolume dominated by ``F`` and bounded by ``reference``.

    Slices along the first objective and sweeps the remaining two, so it is
    meant for three objectives and fronts of moderate size.
    """
    F = np.asarray(F, dtype=float)
    ref = np.asarray(reference, dtype=float)
    if len(F) == 0:
        return 0.0
    F = F[np.all(F < ref, axis=1)]
    if len(F) == 0:
        return 0.0
    if F.shape[1] == 1:
        return float(ref[0] - F[:, 0].min())
    if F.shape[1] == 2:
        pts = F[np.lexsort((F[:, 1], F[:, 0]))]
        vol, best = 0.0, ref[1]
        for x, y in pts:
            if y < best:
                vol += (ref[0] - x) * (best - y)
                best = y
        return float(vol)
    levels = np.unique(F[:, 0])
    vol = 0.0
    for i, lv in enumerate(levels):
        upper = levels[i + 1] if i + 1 < len(levels) else ref[0]
        slab = F[F[:, 0] <= lv][:, 1:]
        vol += (upper - lv) * hypervolume(slab, ref[1:])
    return float(vol)

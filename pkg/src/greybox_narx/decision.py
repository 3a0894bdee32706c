"""A posteriori selection from a Pareto archive.

Two decision makers are provided: the unbiased minimum Manhattan distance to
the normalised ideal point, and a weighted tournament that counts pairwise
wins per objective and aggregates them with preference weights.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ArchiveTooSmall
from .moea.archive import ArchiveEntry, ParetoArchive


@dataclass(frozen=True)
class PreferenceSpec:
    """Objective rankings (1 = most preferred) and preference intensity in [1, 9]."""

    rankings: tuple[int, ...] = (1, 2, 3)
    intensity: float = 5.0

    def __post_init__(self):
        r = tuple(int(x) for x in self.rankings)
        object.__setattr__(self, "rankings", r)
        if sorted(r) != list(range(1, len(r) + 1)):
            raise ValueError(f"rankings must be a permutation of 1..{len(r)}, got {r}")
        if len(r) < 2:
            raise ValueError("need at least two objectives")
        if not 1.0 <= self.intensity <= 9.0:
            raise ValueError("intensity must lie in [1, 9]")

    @classmethod
    def from_dict(cls, d: dict) -> "PreferenceSpec":
        return cls(tuple(d["rankings"]), float(d.get("intensity", 5.0)))

    def to_dict(self) -> dict:
        return {"rankings": list(self.rankings), "intensity": self.intensity}


def preference_relations(rankings, intensity: float) -> np.ndarray:
    """Multiplicative preference matrix ``tau[i, j] = I ** ((O_j - O_i) / (n - 1))``."""
    O = np.asarray(rankings, dtype=float)
    n = len(O)
    return float(intensity) ** ((O[None, :] - O[:, None]) / (n - 1))


def priority_weights(pref: PreferenceSpec, normalize: bool = True) -> np.ndarray:
    """Row geometric means of the preference matrix, by default scaled to sum to one."""
    tau = preference_relations(pref.rankings, pref.intensity)
    w = np.exp(np.log(tau).mean(axis=1))
    return w / w.sum() if normalize else w


@dataclass(frozen=True)
class Selection:
    """Selected entry plus the whole archive ordered from best to worst."""

    method: str
    selected: ArchiveEntry
    ranking: tuple[ArchiveEntry, ...]
    scores: tuple[float, ...]
    weights: tuple[float, ...] | None = None

    @property
    def score(self) -> float:
        return self.scores[0]

    def to_csv(self, path, meta: dict | None = None) -> None:
        with open(path, "w", newline="") as fh:
            for k, v in (meta or {}).items():
                fh.write(f"# {k}: {v}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rank", "genome_bits", "xi", "e_dyn", "e_static", "score"])
            for i, (e, s) in enumerate(zip(self.ranking, self.scores), start=1):
                o = e.objectives
                w.writerow([i, e.genome, o.xi, format(o.e_dyn, ".17g"),
                            format(o.e_static, ".17g"), format(s, ".17g")])


def _matrix(archive) -> tuple[list[ArchiveEntry], np.ndarray]:
    entries = list(archive)
    F = np.array([e.objectives.as_tuple() for e in entries], dtype=float).reshape(-1, 3)
    return entries, F


def manhattan_distances(F: np.ndarray) -> np.ndarray:
    """Distance of every row to the ideal point in min-max normalised space."""
    F = np.asarray(F, dtype=float)
    lo, hi = F.min(axis=0), F.max(axis=0)
    span = hi - lo
    # a constant objective contributes nothing
    scaled = np.divide(F - lo, span, out=np.zeros_like(F), where=span > 0)
    return scaled.sum(axis=1)


def tournament_scores(F: np.ndarray, weights) -> np.ndarray:
    """Weighted geometric aggregation of per-objective pairwise win fractions."""
    F = np.asarray(F, dtype=float)
    n, m = F.shape
    if n < 2:
        raise ArchiveTooSmall(f"tournament needs at least 2 entries, got {n}")
    w = np.asarray(weights, dtype=float)
    if w.shape != (m,):
        raise ValueError(f"expected {m} weights, got {w.shape}")
    wins = (F[None, :, :] > F[:, None, :]).sum(axis=1)  # wins[i, p] = #{j : F[j,p] > F[i,p]}
    T = wins / (n - 1)
    return np.prod(T ** w, axis=1) ** (1.0 / m)


def _tiebreak_key(e: ArchiveEntry):
    # smaller xi, then E, then static error, then genome string
    return (*e.objectives.as_tuple(), e.genome)


def mmd_select(archive: ParetoArchive) -> Selection:
    entries, F = _matrix(archive)
    if not entries:
        raise ArchiveTooSmall("cannot select from an empty archive")
    D = manhattan_distances(F)
    order = sorted(range(len(entries)), key=lambda i: (D[i], _tiebreak_key(entries[i])))
    return Selection("mmd", entries[order[0]], tuple(entries[i] for i in order),
                     tuple(float(D[i]) for i in order))


def mtd_select(archive: ParetoArchive, weights) -> Selection:
    if isinstance(weights, PreferenceSpec):
        weights = priority_weights(weights)
    entries, F = _matrix(archive)
    R = tournament_scores(F, weights)
    order = sorted(range(len(entries)), key=lambda i: (-R[i], _tiebreak_key(entries[i])))
    return Selection("mtd", entries[order[0]], tuple(entries[i] for i in order),
                     tuple(float(R[i]) for i in order), tuple(float(x) for x in weights))

"""Pareto archives: accumulation over runs, set coverage, CSV export."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ..errors import DataError
from ..estimation import ObjectiveVector
from .pareto import nondominated_mask


def genome_to_str(bits) -> str:
    return "".join("1" if b else "0" for b in np.asarray(bits, dtype=bool))


def str_to_genome(s: str) -> np.ndarray:
    s = s.strip()
    if not s or set(s) - {"0", "1"}:
        raise ValueError(f"not a bit string: {s!r}")
    return np.array([c == "1" for c in s], dtype=bool)


@dataclass(frozen=True)
class ArchiveEntry:
    genome: str
    objectives: ObjectiveVector
    run_id: int = 0

    @property
    def bits(self) -> np.ndarray:
        return str_to_genome(self.genome)

    def sort_key(self):
        return (*self.objectives.as_tuple(), self.genome)


class ParetoArchive:
    """Ordered collection of (genome, objectives) pairs."""

    def __init__(self, entries: Iterable[ArchiveEntry] = ()):
        self.entries = list(entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i) -> ArchiveEntry:
        return self.entries[i]

    def objective_matrix(self) -> np.ndarray:
        return np.array([e.objectives.as_tuple() for e in self.entries], dtype=float).reshape(-1, 3)

    def genomes(self) -> list[str]:
        return [e.genome for e in self.entries]

    def is_nondominated(self) -> bool:
        return bool(np.all(nondominated_mask(self.objective_matrix())))

    @classmethod
    def from_arrays(cls, genomes, objectives, run_id: int = 0) -> "ParetoArchive":
        entries = []
        for g, f in zip(np.asarray(genomes, dtype=bool), np.asarray(objectives, dtype=float)):
            entries.append(ArchiveEntry(genome_to_str(g), ObjectiveVector(int(f[0]), float(f[1]), float(f[2])), run_id))
        return cls(entries)

    def to_csv(self, path, meta: dict | None = None) -> None:
        with open(path, "w", newline="") as fh:
            for k, v in (meta or {}).items():
                fh.write(f"# {k}: {v}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["genome_bits", "xi", "e_dyn", "e_static", "run_id"])
            for e in self.entries:
                o = e.objectives
                w.writerow([e.genome, o.xi, format(o.e_dyn, ".17g"), format(o.e_static, ".17g"), e.run_id])

    @classmethod
    def from_csv(cls, path) -> "ParetoArchive":
        try:
            with open(path, newline="") as fh:
                rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
            entries = [ArchiveEntry(r["genome_bits"].strip(),
                                    ObjectiveVector(int(r["xi"]), float(r["e_dyn"]), float(r["e_static"])),
                                    int(r.get("run_id") or 0)) for r in rows]
        except (OSError, KeyError, ValueError) as exc:
            raise DataError(f"cannot read archive {path}: {exc}") from exc
        return cls(entries)


def finalize(entries: Iterable[ArchiveEntry]) -> ParetoArchive:
    """Drop duplicate genomes and penalised or dominated entries; sort by objectives."""
    seen, unique = set(), []
    for e in entries:
        if e.genome in seen or e.objectives.is_penalized:
            continue
        seen.add(e.genome)
        unique.append(e)
    if not unique:
        return ParetoArchive()
    F = np.array([e.objectives.as_tuple() for e in unique])
    keep = nondominated_mask(F)
    return ParetoArchive(sorted((e for e, k in zip(unique, keep) if k), key=ArchiveEntry.sort_key))


def accumulate(runs) -> ParetoArchive:
    """Union of per-run fronts, reduced to its non-dominated, duplicate-free part.

    ``runs`` may hold :class:`ParetoArchive` objects or run results exposing
    ``archive()``; entries keep the id of the first run that found them.
    """
    entries = []
    for run_id, run in enumerate(runs):
        archive = run.archive(run_id) if hasattr(run, "archive") else run
        entries.extend(archive)
    return finalize(entries)


def _as_matrix(front) -> np.ndarray:
    if isinstance(front, ParetoArchive):
        return front.objective_matrix()
    F = np.asarray([f.as_tuple() if hasattr(f, "as_tuple") else f for f in front], dtype=float)
    return F.reshape(len(F), -1) if len(F) else F.reshape(0, 0)


def set_coverage(a, b) -> float:
    """Fraction of ``b`` weakly dominated by at least one member of ``a``."""
    A, B = _as_matrix(a), _as_matrix(b)
    if len(B) == 0:
        return 0.0
    if len(A) == 0:
        return 0.0
    covered = np.all(A[:, None, :] <= B[None, :, :], axis=2).any(axis=0)
    return float(covered.mean())

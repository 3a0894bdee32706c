"""NSGA-II and SPEA-II over term-subset genomes, and the multi-run driver."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ..estimation import PENALTY, DatasetBundle, Evaluator
from ..model import TermPool
from .archive import ParetoArchive, accumulate, finalize
from .operators import binary_tournament, crowded_tournament, reproduce
from .pareto import (
    crowding_distance,
    dominance_matrix,
    fast_non_dominated_sort,
    hypervolume,
    nondominated_mask,
    normalize_objectives,
)

ALGORITHMS = ("nsga2", "spea2")
_DEFAULT_RATES = {"nsga2": (0.9, 0.006), "spea2": (0.7, 0.008)}


@dataclass(frozen=True)
class MoeaConfig:
    algorithm: str = "nsga2"
    population: int = 50
    archive_size: int = 50
    p_c: float = 0.9
    p_m: float = 0.006
    budget: int = 25_000
    runs: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.population < 2 or self.population % 2:
            raise ValueError("population must be a positive even number")
        if self.archive_size < 1:
            raise ValueError("archive_size must be >= 1")
        if not (0 <= self.p_c <= 1 and 0 <= self.p_m <= 1):
            raise ValueError("p_c and p_m must lie in [0, 1]")
        if self.budget < self.population:
            raise ValueError("budget must cover at least one population")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")

    @classmethod
    def for_algorithm(cls, algorithm: str, **overrides) -> "MoeaConfig":
        """Configuration with the recommended crossover/mutation rates for ``algorithm``."""
        p_c, p_m = _DEFAULT_RATES[algorithm]
        return cls(**{"algorithm": algorithm, "p_c": p_c, "p_m": p_m, **overrides})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunResult:
    """Outcome of one run.

    ``genomes``/``objectives`` hold the non-dominated set of every feasible
    structure evaluated during the run; ``final_*`` the non-dominated part of
    the last population (NSGA-II) or archive (SPEA-II).
    """

    genomes: np.ndarray
    objectives: np.ndarray
    final_genomes: np.ndarray
    final_objectives: np.ndarray
    evaluations: int
    unique_evaluations: int
    generations: int
    hypervolume_history: list = field(default_factory=list)

    def archive(self, run_id: int = 0) -> ParetoArchive:
        return ParetoArchive.from_arrays(self.genomes, self.objectives, run_id)


class _BestSoFar:
    """Non-dominated set of all feasible evaluated genomes."""

    def __init__(self, n_bits: int):
        self.genomes = np.zeros((0, n_bits), dtype=bool)
        self.F = np.zeros((0, 3))
        self._keys: set[bytes] = set()

    def update(self, genomes: np.ndarray, F: np.ndarray) -> None:
        new_g, new_f = [], []
        for g, f in zip(genomes, F):
            if f[1] >= PENALTY or f[2] >= PENALTY:
                continue
            key = np.packbits(g).tobytes()
            if key in self._keys:
                continue
            self._keys.add(key)
            new_g.append(g)
            new_f.append(f)
        if not new_g:
            return
        G = np.vstack([self.genomes, np.array(new_g)])
        F_all = np.vstack([self.F, np.array(new_f)])
        keep = nondominated_mask(F_all)
        self.genomes, self.F = G[keep], F_all[keep]
        self._keys = {np.packbits(g).tobytes() for g in self.genomes}


def _evaluate(evaluator, genomes: np.ndarray) -> np.ndarray:
    return np.array([evaluator(g).as_tuple() for g in genomes], dtype=float)


def _hv_reference(F: np.ndarray, n_bits: int) -> tuple:
    # fixed per run: twice the worst feasible errors of the initial population
    feasible = F[F[:, 1] < PENALTY]
    if len(feasible) == 0:
        return (n_bits + 1, PENALTY, PENALTY)
    return (n_bits + 1, 2 * feasible[:, 1].max(), 2 * feasible[:, 2].max())


def _survivors(F: np.ndarray, size: int) -> np.ndarray:
    """Rank-then-crowding truncation of a combined population to ``size`` rows."""
    fronts, _ = fast_non_dominated_sort(F)
    chosen = []
    for front in fronts:
        if len(chosen) + len(front) <= size:
            chosen.extend(front.tolist())
            continue
        cd = crowding_distance(F[front])
        order = np.argsort(-cd, kind="stable")
        chosen.extend(front[order[:size - len(chosen)]].tolist())
        break
    return np.array(chosen, dtype=int)


def _rank_and_crowding(F: np.ndarray):
    fronts, rank = fast_non_dominated_sort(F)
    crowd = np.empty(len(F))
    for front in fronts:
        crowd[front] = crowding_distance(F[front])
    return rank, crowd


def _final(genomes, F):
    keep = nondominated_mask(F) & (F[:, 1] < PENALTY) & (F[:, 2] < PENALTY)
    return genomes[keep], F[keep]


def _result(best, final_g, final_f, evaluator, start_calls, start_unique, generations, history):
    fg, ff = _final(final_g, final_f)
    return RunResult(best.genomes.copy(), best.F.copy(), fg, ff,
                     evaluator.calls - start_calls, evaluator.unique - start_unique,
                     generations, history)


def run_nsga2(evaluator, config: MoeaConfig, rng: np.random.Generator,
              track_hypervolume: bool = False) -> RunResult:
    """Elitist (mu + lambda) NSGA-II with crowded tournament selection."""
    ps, n = config.population, evaluator.n_bits
    calls0, unique0 = evaluator.calls, evaluator.unique
    best = _BestSoFar(n)
    pop = rng.random((ps, n)) < 0.5
    F = _evaluate(evaluator, pop)
    evals, generations = ps, 1
    best.update(pop, F)
    ref = _hv_reference(F, n)
    history = [hypervolume(best.F, ref)] if track_hypervolume else []
    while evals + ps <= config.budget:
        rank, crowd = _rank_and_crowding(F)
        children = reproduce(pop, lambda r: crowded_tournament(r, rank, crowd),
                             config.p_c, config.p_m, rng)
        F_children = _evaluate(evaluator, children)
        evals += ps
        generations += 1
        best.update(children, F_children)
        if track_hypervolume:
            history.append(hypervolume(best.F, ref))
        union = np.vstack([pop, children])
        F_union = np.vstack([F, F_children])
        keep = _survivors(F_union, ps)
        pop, F = union[keep], F_union[keep]
    return _result(best, pop, F, evaluator, calls0, unique0, generations, history)


def spea2_fitness(F: np.ndarray) -> np.ndarray:
    """Raw fitness (sum of dominators' strengths) plus k-th nearest neighbour density."""
    D = dominance_matrix(F)
    strength = D.sum(axis=1)
    raw = (D * strength[:, None]).sum(axis=0).astype(float)
    X = normalize_objectives(F)
    dist = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2))
    k = int(np.sqrt(len(F)))
    kth = np.sort(dist, axis=1)[:, min(k, len(F) - 1)]
    return raw + 1.0 / (kth + 2.0)


def _truncate(X: np.ndarray, size: int) -> np.ndarray:
    """Iteratively drop the point whose sorted neighbour distances are lexicographically smallest."""
    alive = list(range(len(X)))
    dist = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2))
    np.fill_diagonal(dist, np.inf)
    while len(alive) > size:
        sub = np.sort(dist[np.ix_(alive, alive)], axis=1)
        victim = np.lexsort(sub.T[::-1])[0]
        del alive[victim]
    return np.array(alive, dtype=int)


def spea2_environmental_selection(F: np.ndarray, fitness: np.ndarray, size: int) -> np.ndarray:
    nd = np.flatnonzero(fitness < 1.0)
    if len(nd) == size:
        return nd
    if len(nd) < size:
        return np.argsort(fitness, kind="stable")[:size]
    X = normalize_objectives(F)
    return nd[_truncate(X[nd], size)]


def run_spea2(evaluator, config: MoeaConfig, rng: np.random.Generator,
              track_hypervolume: bool = False) -> RunResult:
    """SPEA-II with archive truncation and binary tournament mating on the archive."""
    ps, n = config.population, evaluator.n_bits
    calls0, unique0 = evaluator.calls, evaluator.unique
    best = _BestSoFar(n)
    pop = rng.random((ps, n)) < 0.5
    F = _evaluate(evaluator, pop)
    evals, generations = ps, 1
    best.update(pop, F)
    ref = _hv_reference(F, n)
    history = [hypervolume(best.F, ref)] if track_hypervolume else []
    arch, F_arch = np.zeros((0, n), dtype=bool), np.zeros((0, 3))
    while True:
        union = np.vstack([pop, arch])
        F_union = np.vstack([F, F_arch])
        fitness = spea2_fitness(F_union)
        keep = spea2_environmental_selection(F_union, fitness, config.archive_size)
        arch, F_arch, fit_arch = union[keep], F_union[keep], fitness[keep]
        if evals + ps > config.budget:
            break
        pop = reproduce(arch, lambda r: binary_tournament(r, fit_arch),
                        config.p_c, config.p_m, rng, n_offspring=ps)
        F = _evaluate(evaluator, pop)
        evals += ps
        generations += 1
        best.update(pop, F)
        if track_hypervolume:
            history.append(hypervolume(best.F, ref))
    return _result(best, arch, F_arch, evaluator, calls0, unique0, generations, history)


RUNNERS = {"nsga2": run_nsga2, "spea2": run_spea2}


def run_rng(seed: int, run_index: int) -> np.random.Generator:
    """Independent generator for run ``run_index`` of a seeded experiment."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(run_index)]))


def run_moea(evaluator, config: MoeaConfig, run_index: int = 0, **kwargs) -> RunResult:
    return RUNNERS[config.algorithm](evaluator, config, run_rng(config.seed, run_index), **kwargs)


def _run_job(args) -> RunResult:
    pool, bundle, config, run_index = args
    return run_moea(Evaluator(pool, bundle), config, run_index)


def identify(bundle: DatasetBundle, pool: TermPool, config: MoeaConfig,
             jobs: int = 1) -> tuple[ParetoArchive, list[RunResult]]:
    """Run ``config.runs`` independent searches and accumulate their fronts."""
    tasks = [(pool, bundle, config, r) for r in range(config.runs)]
    if jobs > 1 and config.runs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_job, tasks))
    else:
        evaluator = Evaluator(pool, bundle)
        results = [run_moea(evaluator, config, r) for r in range(config.runs)]
    return accumulate(results), results


def exhaustive_front(evaluator) -> ParetoArchive:
    """Pareto front by enumerating every genome (small pools only)."""
    n = evaluator.n_bits
    if n > 20:
        raise ValueError("exhaustive enumeration limited to 20 bits")
    codes = np.arange(2 ** n, dtype=np.int64)
    genomes = ((codes[:, None] >> np.arange(n)) & 1).astype(bool)
    F = _evaluate(evaluator, genomes)
    return finalize(ParetoArchive.from_arrays(genomes, F).entries)


__all__ = [
    "ALGORITHMS", "MoeaConfig", "RunResult", "run_nsga2", "run_spea2", "run_moea",
    "identify", "exhaustive_front", "spea2_fitness", "spea2_environmental_selection", "run_rng",
]

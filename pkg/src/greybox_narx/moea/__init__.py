"""Multi-objective evolutionary search over term-subset genomes."""

from .algorithms import (
    ALGORITHMS,
    MoeaConfig,
    RunResult,
    exhaustive_front,
    identify,
    run_moea,
    run_nsga2,
    run_rng,
    run_spea2,
    spea2_environmental_selection,
    spea2_fitness,
)
from .archive import ArchiveEntry, ParetoArchive, accumulate, finalize, genome_to_str, set_coverage, str_to_genome
from .operators import binary_tournament, crowded_tournament, reproduce
from .pareto import (
    crowding_distance,
    dominance_matrix,
    dominates,
    fast_non_dominated_sort,
    hypervolume,
    nondominated_mask,
    normalize_objectives,
    weakly_dominates,
)

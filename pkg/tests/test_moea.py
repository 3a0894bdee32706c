import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from _problems import small_bundle, small_pool
from greybox_narx.errors import DataError
from greybox_narx.estimation import PENALTY, Evaluator, ObjectiveVector
from greybox_narx.moea import (
    ArchiveEntry,
    MoeaConfig,
    ParetoArchive,
    accumulate,
    binary_tournament,
    crowded_tournament,
    crowding_distance,
    dominance_matrix,
    dominates,
    exhaustive_front,
    fast_non_dominated_sort,
    finalize,
    genome_to_str,
    hypervolume,
    identify,
    nondominated_mask,
    normalize_objectives,
    reproduce,
    run_moea,
    set_coverage,
    spea2_environmental_selection,
    spea2_fitness,
    str_to_genome,
    weakly_dominates,
)


@pytest.fixture(scope="module")
def small_evaluator():
    return Evaluator(small_pool(), small_bundle())


def test_dominance_examples():
    assert dominates((1, 2, 3), (1, 2, 4))
    assert not dominates((1, 2, 3), (1, 2, 3))
    assert weakly_dominates((1, 2, 3), (1, 2, 3))
    assert not dominates((0, 5, 0), (1, 1, 1))
    assert dominates(ObjectiveVector(1, 0.1, 0.2), ObjectiveVector(2, 0.1, 0.2))
    with pytest.raises(ValueError):
        dominates((1, 2), (1, 2, 3))


def brute_fronts(F):
    remaining = set(range(len(F)))
    fronts = []
    while remaining:
        front = sorted(i for i in remaining
                       if not any(dominates(F[j], F[i]) for j in remaining if j != i))
        fronts.append(front)
        remaining -= set(front)
    return fronts


def test_non_dominated_sort_against_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(30):
        F = rng.integers(0, 5, size=(rng.integers(1, 25), 3)).astype(float)
        fronts, rank = fast_non_dominated_sort(F)
        assert [sorted(f.tolist()) for f in fronts] == brute_fronts(F)
        for r, f in enumerate(fronts):
            assert np.all(rank[f] == r)
        assert_array_equal(nondominated_mask(F), rank == 0)


def test_dominance_matrix_diagonal_false():
    F = np.array([[1.0, 1.0], [1.0, 1.0], [0.0, 2.0]])
    D = dominance_matrix(F)
    assert not D.any()


def test_crowding_distance_by_hand():
    F = np.array([[0.0, 4.0], [1.0, 2.0], [3.0, 1.0], [4.0, 0.0]])
    d = crowding_distance(F)
    assert np.isinf(d[0]) and np.isinf(d[3])
    assert_allclose(d[1:3], [0.75 + 0.75, 0.75 + 0.5])
    assert np.all(np.isinf(crowding_distance(F[:2])))


def test_normalize_objectives_handles_penalty():
    F = np.array([[1.0, 0.5], [3.0, PENALTY], [2.0, 1.5]])
    X = normalize_objectives(F)
    assert_allclose(X[:, 0], [0.0, 1.0, 0.5])
    assert_allclose(X[:, 1], [0.0, 2.0, 1.0])


def test_hypervolume_2d_by_hand():
    F = np.array([[1.0, 3.0], [2.0, 2.0], [3.0, 1.0]])
    assert hypervolume(F, (4.0, 4.0)) == 6.0
    assert hypervolume(np.array([[1.0, 1.0, 1.0]]), (2.0, 3.0, 4.0)) == 6.0
    assert hypervolume(np.zeros((0, 3)), (1.0, 1.0, 1.0)) == 0.0
    assert hypervolume(np.array([[5.0, 0.0, 0.0]]), (4.0, 4.0, 4.0)) == 0.0


def test_hypervolume_3d_against_voxel_count():
    rng = np.random.default_rng(1)
    ref = (6, 6, 6)
    cells = np.array(list(itertools.product(range(6), repeat=3)))
    for _ in range(20):
        F = rng.integers(0, 6, size=(rng.integers(1, 8), 3)).astype(float)
        covered = np.any(np.all(F[None, :, :] <= cells[:, None, :], axis=2), axis=1)
        assert hypervolume(F, ref) == covered.sum()


def test_set_coverage():
    A = [(1.0, 1.0, 1.0)]
    B = [(1.0, 1.0, 1.0), (2.0, 2.0, 2.0), (0.0, 3.0, 3.0)]
    assert_allclose(set_coverage(A, B), 2 / 3)
    assert set_coverage(B, A) == 1.0
    assert set_coverage([], B) == 0.0
    assert set_coverage(A, []) == 0.0


def test_genome_strings():
    bits = np.array([1, 0, 1, 1], dtype=bool)
    assert genome_to_str(bits) == "1011"
    assert_array_equal(str_to_genome("1011"), bits)
    with pytest.raises(ValueError):
        str_to_genome("10a1")


def test_reproduce_without_variation_copies_parents():
    rng = np.random.default_rng(0)
    parents = rng.random((6, 10)) < 0.5
    picks = iter([0, 1, 2, 3, 4, 5])
    kids = reproduce(parents, lambda r: next(picks), 0.0, 0.0, rng)
    assert_array_equal(kids, parents)
    flipped = reproduce(parents, lambda r: 0, 0.0, 1.0, rng, n_offspring=2)
    assert_array_equal(flipped, ~parents[[0, 0]])
    with pytest.raises(ValueError):
        reproduce(parents, lambda r: 0, 0.5, 0.1, rng, n_offspring=3)


def test_uniform_crossover_preserves_gene_counts():
    rng = np.random.default_rng(3)
    parents = rng.random((2, 40)) < 0.5
    picks = itertools.cycle([0, 1])
    kids = reproduce(parents, lambda r: next(picks), 1.0, 0.0, rng, n_offspring=2)
    assert_array_equal(kids.sum(axis=0), parents.sum(axis=0))
    assert not np.array_equal(kids, parents)


def test_tournaments_prefer_better():
    rng = np.random.default_rng(0)
    rank = np.array([0, 1])
    crowd = np.array([0.0, np.inf])
    # lower rank wins regardless of crowding
    wins = [crowded_tournament(rng, rank, crowd) for _ in range(200)]
    assert wins.count(0) > wins.count(1)
    wins = [binary_tournament(rng, np.array([0.5, 3.0])) for _ in range(200)]
    assert wins.count(0) > wins.count(1)
    same_rank = [crowded_tournament(rng, np.array([0, 0]), np.array([1.0, 2.0])) for _ in range(200)]
    assert same_rank.count(1) > same_rank.count(0)


def entry(g, f, run=0):
    return ArchiveEntry(g, ObjectiveVector(*f), run)


def test_finalize_dedupes_and_filters():
    entries = [entry("110", (2, 0.1, 1.0)), entry("110", (2, 0.1, 1.0), 1),
               entry("011", (2, 0.2, 2.0)), entry("001", (1, PENALTY, PENALTY)),
               entry("100", (1, 0.5, 0.5))]
    arch = finalize(entries)
    assert arch.genomes() == ["100", "110"]
    assert arch.is_nondominated()


def test_accumulate_keeps_first_run_id():
    a = ParetoArchive([entry("10", (1, 0.2, 1.0))])
    b = ParetoArchive([entry("10", (1, 0.2, 1.0), 1), entry("01", (1, 0.1, 2.0), 1)])
    acc = accumulate([a, b])
    assert [(e.genome, e.run_id) for e in acc] == [("01", 1), ("10", 0)]


def test_archive_csv_round_trip(tmp_path):
    arch = ParetoArchive([entry("101", (2, 0.1234567890123, 3.5), 4)])
    arch.to_csv(tmp_path / "a.csv", {"config_hash": "x"})
    text = (tmp_path / "a.csv").read_text()
    assert text.splitlines()[1] == "genome_bits,xi,e_dyn,e_static,run_id"
    back = ParetoArchive.from_csv(tmp_path / "a.csv")
    assert back.entries == arch.entries
    (tmp_path / "b.csv").write_text("genome_bits,xi\n101,x\n")
    with pytest.raises(DataError):
        ParetoArchive.from_csv(tmp_path / "b.csv")


def test_moea_config_defaults_and_validation():
    n = MoeaConfig.for_algorithm("nsga2")
    s = MoeaConfig.for_algorithm("spea2")
    assert (n.p_c, n.p_m, n.population, n.budget) == (0.9, 0.006, 50, 25000)
    assert (s.p_c, s.p_m, s.archive_size) == (0.7, 0.008, 50)
    for bad in [dict(population=51), dict(p_c=1.5), dict(budget=10), dict(algorithm="moead"),
                dict(runs=0), dict(archive_size=0)]:
        with pytest.raises(ValueError):
            MoeaConfig(**bad)


def test_spea2_fitness_by_hand():
    F = np.array([[0.0, 1.0], [1.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    fit = spea2_fitness(F)
    # strengths: 2, 2, 1, 0 -> raw fitness 0, 0, 2+2, 2+2+1
    assert_allclose(np.floor(fit), [0, 0, 4, 5])
    assert np.all(fit - np.floor(fit) <= 0.5)


def test_spea2_truncation_drops_crowded_point():
    F = np.array([[0.0, 1.0], [0.5, 0.5], [0.51, 0.49], [1.0, 0.0]])
    keep = spea2_environmental_selection(F, spea2_fitness(F), 3)
    assert len(keep) == 3
    assert {0, 3} <= set(keep.tolist())
    fill = spea2_environmental_selection(F, spea2_fitness(F), 4)
    assert sorted(fill.tolist()) == [0, 1, 2, 3]
    F2 = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    assert spea2_environmental_selection(F2, spea2_fitness(F2), 2).tolist() == [0, 1]


@pytest.mark.parametrize("algorithm", ["nsga2", "spea2"])
def test_runs_are_reproducible_and_budgeted(small_evaluator, algorithm):
    cfg = MoeaConfig.for_algorithm(algorithm, budget=1030, runs=1, seed=7)
    a = run_moea(small_evaluator, cfg, 0)
    b = run_moea(small_evaluator, cfg, 0)
    assert_array_equal(a.genomes, b.genomes)
    assert_array_equal(a.objectives, b.objectives)
    assert a.evaluations == 1000 and a.generations == 20
    assert np.all(nondominated_mask(a.objectives))
    assert np.all(a.objectives[:, 1] < PENALTY)
    c = run_moea(small_evaluator, cfg, 1)
    assert not np.array_equal(a.genomes, c.genomes) or not np.array_equal(a.final_genomes, c.final_genomes)


def test_run_front_never_beats_oracle(small_evaluator):
    oracle = exhaustive_front(small_evaluator).objective_matrix()
    r = run_moea(small_evaluator, MoeaConfig.for_algorithm("nsga2", budget=2000, runs=1), 0)
    for f in r.objectives:
        assert any(np.all(o <= f) for o in oracle)


def test_hypervolume_history_is_monotone(small_evaluator):
    cfg = MoeaConfig.for_algorithm("spea2", budget=1000, runs=1)
    h = run_moea(small_evaluator, cfg, 0, track_hypervolume=True).hypervolume_history
    assert len(h) == 20
    assert all(b >= a for a, b in zip(h, h[1:]))


def test_identify_parallel_matches_serial():
    bundle, pool = small_bundle(), small_pool()
    cfg = MoeaConfig.for_algorithm("nsga2", budget=500, runs=3, seed=2)
    serial, _ = identify(bundle, pool, cfg, jobs=1)
    parallel, _ = identify(bundle, pool, cfg, jobs=2)
    assert serial.entries == parallel.entries
    assert serial.is_nondominated()


def test_exhaustive_front_is_nondominated(small_evaluator):
    front = exhaustive_front(small_evaluator)
    assert len(front) > 10 and front.is_nondominated()
    with pytest.raises(ValueError):
        exhaustive_front(type("Wide", (), {"n_bits": 25})())

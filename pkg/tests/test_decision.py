import numpy as np
import pytest
from numpy.testing import assert_allclose

from greybox_narx.decision import (
    PreferenceSpec,
    manhattan_distances,
    mmd_select,
    mtd_select,
    preference_relations,
    priority_weights,
    tournament_scores,
)
from greybox_narx.errors import ArchiveTooSmall
from greybox_narx.estimation import ObjectiveVector
from greybox_narx.moea import ArchiveEntry, ParetoArchive


def archive(rows, genomes=None):
    genomes = genomes or [format(i, "04b") for i in range(len(rows))]
    return ParetoArchive([ArchiveEntry(g, ObjectiveVector(*r)) for g, r in zip(genomes, rows)])


def test_preference_relations_by_hand():
    tau = preference_relations((3, 1, 2), 5.0)
    s5 = np.sqrt(5)
    expected = [[1, 1 / 5, 1 / s5], [5, 1, s5], [s5, 1 / s5, 1]]
    assert_allclose(tau, expected, rtol=1e-12)
    assert_allclose(tau * tau.T, 1.0)


def test_priority_weights_reference_values():
    w = priority_weights(PreferenceSpec((3, 1, 2), 5.0), normalize=False)
    assert_allclose(w, [1 / np.sqrt(5), np.sqrt(5), 1.0], rtol=1e-12)
    w = priority_weights(PreferenceSpec((3, 1, 2), 5.0))
    assert_allclose(w, [0.12141716, 0.60708581, 0.27149703], atol=1e-8)
    assert_allclose(priority_weights(PreferenceSpec((1, 3, 2), 5.0)), [0.6071, 0.1214, 0.2715], atol=1e-4)
    assert_allclose(priority_weights(PreferenceSpec((1, 2, 3), 5.0)), [0.6071, 0.2715, 0.1214], atol=1e-4)
    assert_allclose(priority_weights(PreferenceSpec((2, 3, 1), 1.0)), [1 / 3] * 3)


def test_preference_spec_validation():
    for bad in [dict(rankings=(1, 1, 2)), dict(rankings=(0, 1, 2)), dict(intensity=0.5),
                dict(intensity=10), dict(rankings=(1,))]:
        with pytest.raises(ValueError):
            PreferenceSpec(**bad)
    p = PreferenceSpec.from_dict({"rankings": [3, 1, 2], "intensity": 5})
    assert p.rankings == (3, 1, 2) and PreferenceSpec.from_dict(p.to_dict()) == p


def test_manhattan_distance_example():
    F = np.array([[1.0, 0.0], [0.0, 1.0], [0.4, 0.4]])
    assert_allclose(manhattan_distances(F), [1.0, 1.0, 0.8])
    # degenerate objective contributes zero
    assert_allclose(manhattan_distances(np.array([[2.0, 0.0], [2.0, 1.0]])), [0.0, 1.0])


def test_mmd_picks_knee():
    sel = mmd_select(archive([(1, 1.0, 0.0), (1, 0.0, 1.0), (1, 0.4, 0.4)]))
    assert sel.selected.genome == "0010"
    assert_allclose(sel.score, 0.8)
    assert [e.genome for e in sel.ranking] == ["0010", "0001", "0000"]


def test_mmd_singleton_and_empty():
    sel = mmd_select(archive([(3, 0.2, 5.0)]))
    assert sel.score == 0.0
    with pytest.raises(ArchiveTooSmall):
        mmd_select(ParetoArchive([]))


def test_tournament_scores_by_hand():
    F = np.array([[1.0, 3.0, 2.0], [2.0, 1.0, 3.0], [3.0, 2.0, 1.0]])
    w = np.array([0.5, 0.3, 0.2])
    R = tournament_scores(F, w)
    T = np.array([[1.0, 0.0, 0.5], [0.5, 1.0, 0.0], [0.0, 0.5, 1.0]])
    expected = [np.prod(T[i] ** w) ** (1 / 3) for i in range(3)]
    assert_allclose(R, expected)
    with pytest.raises(ArchiveTooSmall):
        tournament_scores(F[:1], w)
    with pytest.raises(ValueError):
        tournament_scores(F, w[:2])


def test_mtd_prefers_weighted_objective():
    rows = [(1, 0.5, 9.0), (10, 0.4, 8.0), (4, 0.02, 5.0), (3, 0.2, 2.0), (5, 0.01, 6.0)]
    sel = mtd_select(archive(rows), PreferenceSpec((3, 1, 2), 5.0))
    assert sel.selected.genome == "0010"
    assert_allclose(sel.scores[:3], [0.89377236, 0.88795361, 0.85906578], atol=1e-8)
    # being worst on any objective zeroes the geometric score
    assert sel.scores[3:] == (0.0, 0.0)
    assert_allclose(sel.weights, [0.12141716, 0.60708581, 0.27149703], atol=1e-8)
    sel = mtd_select(archive(rows), PreferenceSpec((1, 2, 3), 5.0))
    assert sel.selected.genome == "0011"


def test_mtd_two_entries_dominated_never_wins():
    # each tournament score is zero, so the tie-break decides
    rows = [(3, 0.2, 1.0), (3, 0.1, 1.0)]
    sel = mtd_select(archive(rows, ["1100", "0011"]), [1 / 3] * 3)
    assert sel.selected.genome == "0011"
    sel = mmd_select(archive(rows, ["1100", "0011"]))
    assert sel.selected.genome == "0011"


def test_ranking_csv(tmp_path):
    sel = mmd_select(archive([(1, 1.0, 0.0), (1, 0.0, 1.0), (1, 0.4, 0.4)]))
    sel.to_csv(tmp_path / "r.csv", {"config_hash": "abc"})
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "# config_hash: abc"
    assert lines[1] == "rank,genome_bits,xi,e_dyn,e_static,score"
    assert lines[2].startswith("1,0010,")
    assert len(lines) == 5

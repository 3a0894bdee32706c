"""Selection, uniform crossover and bit-flip mutation on binary genomes."""

from __future__ import annotations

from typing import Callable

import numpy as np


def crowded_tournament(rng: np.random.Generator, rank, crowding) -> int:
    """Binary tournament: lower rank wins, then larger crowding distance, then a coin flip."""
    i, j = rng.integers(len(rank), size=2)
    if rank[i] != rank[j]:
        return int(i if rank[i] < rank[j] else j)
    if crowding[i] != crowding[j]:
        return int(i if crowding[i] > crowding[j] else j)
    return int(i if rng.random() < 0.5 else j)


def binary_tournament(rng: np.random.Generator, fitness) -> int:
    """Binary tournament on a scalar fitness to be minimised, ties broken at random."""
    i, j = rng.integers(len(fitness), size=2)
    if fitness[i] != fitness[j]:
        return int(i if fitness[i] < fitness[j] else j)
    return int(i if rng.random() < 0.5 else j)


def reproduce(parents: np.ndarray, select: Callable[[np.random.Generator], int],
              p_c: float, p_m: float, rng: np.random.Generator,
              n_offspring: int | None = None) -> np.ndarray:
    """Produce offspring by pairwise selection, parameterized uniform crossover and mutation.

    For each pair two parents are drawn with ``select``; with probability
    ``p_c`` every gene is swapped between the two children with probability
    0.5.  Every bit of every child is then flipped with probability ``p_m``.
    """
    parents = np.asarray(parents, dtype=bool)
    n_offspring = len(parents) if n_offspring is None else n_offspring
    if n_offspring % 2:
        raise ValueError("number of offspring must be even")
    n = parents.shape[1]
    children = np.empty((n_offspring, n), dtype=bool)
    for i in range(n_offspring // 2):
        p, q = select(rng), select(rng)
        a, b = parents[p].copy(), parents[q].copy()
        if p_c > rng.random():
            swap = rng.random(n) < 0.5
            a[swap] = parents[q][swap]
            b[swap] = parents[p][swap]
        children[2 * i] = a
        children[2 * i + 1] = b
    children ^= rng.random((n_offspring, n)) < p_m
    return children

"""Variance Diversity and diversity-maximising subset selection."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

BRUTE_FORCE_LIMIT = 10**6


@dataclass(frozen=True)
class SelectionResult:
    chosen_indices: tuple[int, ...]
    diversity: float


def _as_vectors(vectors) -> np.ndarray:
    v = np.asarray(vectors, dtype=np.float64)
    if v.ndim != 2:
        raise ValueError(f"expected a (n, D) array of vectors, got shape {v.shape}")
    if len(v) == 0:
        raise ValueError("variance diversity of an empty set")
    return v


def variance_diversity(vectors) -> float:
    """Mean squared Euclidean distance of the vectors from their centroid."""
    v = _as_vectors(vectors)
    # shifting by a member first makes identical rows give exactly zero
    u = v - v[0]
    delta = u - u.mean(axis=0)
    return float(np.mean(np.einsum("ij,ij->i", delta, delta)))


def _subset_diversities(v: np.ndarray, subsets: np.ndarray) -> np.ndarray:
    pts = v[subsets]                                     # (n_subsets, S, D)
    delta = pts - pts.mean(axis=1, keepdims=True)
    return np.einsum("nsd,nsd->ns", delta, delta).mean(axis=1)


def kmeanspp_select(vectors, S: int, rng: np.random.Generator) -> SelectionResult:
    """k-means++ seeding: pick ``S`` distinct rows, spread out in Euclidean distance.

    The first index is uniform; each later index is drawn with probability
    proportional to its squared distance from the nearest chosen row. If every
    remaining row coincides with a chosen one, the draw is uniform over the
    unchosen indices.
    """
    v = _as_vectors(vectors)
    E = len(v)
    if not 1 <= S <= E:
        raise ValueError(f"need 1 <= S <= E, got S={S}, E={E}")
    chosen = [int(rng.integers(E))]
    available = np.ones(E, dtype=bool)
    available[chosen[0]] = False
    d2 = np.full(E, np.inf)
    for _ in range(1, S):
        diff = v - v[chosen[-1]]
        d2 = np.minimum(d2, np.einsum("ij,ij->i", diff, diff))
        weights = np.where(available, d2, 0.0)
        total = weights.sum()
        if total > 0.0:
            cum = np.cumsum(weights)
            idx = int(np.searchsorted(cum, rng.random() * total, side="right"))
            if idx >= E:
                idx = int(np.flatnonzero(weights)[-1])
        else:
            idx = int(rng.choice(np.flatnonzero(available)))
        chosen.append(idx)
        available[idx] = False
    return SelectionResult(tuple(chosen), variance_diversity(v[chosen]))


def random_select(vectors, S: int, rng: np.random.Generator) -> SelectionResult:
    """Uniformly random ``S``-subset (the ablation baseline)."""
    v = _as_vectors(vectors)
    E = len(v)
    if not 1 <= S <= E:
        raise ValueError(f"need 1 <= S <= E, got S={S}, E={E}")
    idx = tuple(int(i) for i in rng.choice(E, size=S, replace=False))
    return SelectionResult(idx, variance_diversity(v[list(idx)]))


def brute_force_max_variance(vectors, S: int) -> SelectionResult:
    """Exact maximiser over all ``S``-subsets; ties go to the lexicographically first."""
    v = _as_vectors(vectors)
    E = len(v)
    if not 1 <= S <= E:
        raise ValueError(f"need 1 <= S <= E, got S={S}, E={E}")
    if math.comb(E, S) > BRUTE_FORCE_LIMIT:
        raise ValueError(f"C({E}, {S}) = {math.comb(E, S)} exceeds {BRUTE_FORCE_LIMIT}")
    subsets = np.array(list(itertools.combinations(range(E), S)), dtype=np.intp)
    scores = _subset_diversities(v, subsets)
    best = subsets[int(np.argmax(scores))]  # first maximum == lexicographically smallest
    return SelectionResult(tuple(int(i) for i in best), variance_diversity(v[best]))


def select(candidate_set, S: int, rng: np.random.Generator) -> SelectionResult:
    """k-means++ selection over a scored :class:`~divaug.policy.CandidateSet`."""
    if candidate_set.prob_vectors is None:
        raise ValueError("candidate set has not been scored")
    return kmeanspp_select(candidate_set.prob_vectors, S, rng)

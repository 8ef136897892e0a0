"""Uniform sub-policy search space and the expand stage."""
from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .imageops import ALL_KINDS, OpKind, Operation, apply_op, check_image


@dataclass(frozen=True)
class SubPolicy:
    op1: Operation
    op2: Operation

    @property
    def ops(self) -> tuple[Operation, Operation]:
        return (self.op1, self.op2)

    def describe(self) -> str:
        return " -> ".join(f"{op.kind.value}(p={op.p:.3f}, m={op.m:.3f})" for op in self.ops)


@dataclass
class CandidateSet:
    source_index: int
    sub_policies: list[SubPolicy]
    images: list[np.ndarray]
    prob_vectors: np.ndarray | None = None

    def __post_init__(self):
        if len(self.images) < 1:
            raise ValueError("a candidate set needs at least one candidate")
        if len(self.sub_policies) != len(self.images):
            raise ValueError("sub_policies and images differ in length")
        if self.prob_vectors is not None:
            self.set_prob_vectors(self.prob_vectors)

    def __len__(self) -> int:
        return len(self.images)

    def set_prob_vectors(self, probs) -> None:
        probs = np.asarray(probs, dtype=np.float64)
        if probs.ndim != 2 or probs.shape[0] != len(self.images):
            raise ValueError(f"expected {len(self.images)} probability vectors, got shape {probs.shape}")
        if np.any(probs < 0) or np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("probability vectors must lie on the simplex")
        self.prob_vectors = probs


def sample_subpolicy(rng: np.random.Generator) -> SubPolicy:
    """Draw two kinds uniformly (with replacement), then p1, p2, then m1, m2."""
    k1, k2 = (int(k) for k in rng.integers(len(ALL_KINDS), size=2))
    p1, p2 = rng.random(2)
    m1, m2 = rng.random(2)
    return SubPolicy(
        Operation(ALL_KINDS[k1], float(p1), float(m1)),
        Operation(ALL_KINDS[k2], float(p2), float(m2)),
    )


def apply_subpolicy(t: SubPolicy, image: np.ndarray, rng: np.random.Generator,
                    partner_pool: Sequence[np.ndarray] | np.ndarray | None = None) -> np.ndarray:
    """Run ``t.op1`` then ``t.op2`` through :func:`apply_op`.

    For a SamplePairing op the partner index is drawn from ``rng`` before
    that op's gate, whether or not the op fires.
    """
    out = image
    for op in t.ops:
        partner = None
        if op.kind is OpKind.SAMPLE_PAIRING:
            if partner_pool is None or len(partner_pool) == 0:
                raise ValueError("SamplePairing needs a non-empty partner pool")
            partner = partner_pool[int(rng.integers(len(partner_pool)))]
        out = apply_op(op, out, rng, partner)
    return out


def expand(image: np.ndarray, E: int, rng: np.random.Generator | Sequence[np.random.Generator],
           partner_pool: Sequence[np.ndarray] | np.ndarray | None = None,
           source_index: int = 0,
           post: Callable[[np.ndarray, np.random.Generator], np.ndarray] | None = None) -> CandidateSet:
    """Generate ``E`` candidates, each a freshly sampled sub-policy applied to ``image``.

    ``rng`` is either one generator shared by all candidates or a sequence of
    ``E`` per-candidate generators. ``post`` (e.g. the dataset default
    augmentation) is applied to each candidate with that candidate's stream.
    """
    if E < 1:
        raise ValueError(f"E must be >= 1, got {E}")
    image = check_image(image)
    if isinstance(rng, np.random.Generator):
        streams = [rng] * E
    else:
        streams = list(rng)
        if len(streams) != E:
            raise ValueError(f"expected {E} random streams, got {len(streams)}")
    policies, images = [], []
    for g in streams:
        t = sample_subpolicy(g)
        out = apply_subpolicy(t, image, g, partner_pool)
        if post is not None:
            out = post(out, g)
        policies.append(t)
        images.append(out)
    return CandidateSet(source_index, policies, images)

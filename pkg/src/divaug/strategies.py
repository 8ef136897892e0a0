"""Named augmentation strategies used for training and measurement.

A strategy turns one source image into ``k`` augmented images. ``divaug``
and ``random-select`` both start from ``E`` candidates (sub-policy, then the
dataset default augmentation) and keep ``k`` of them: the first by k-means++
seeding on the model's probability vectors, the second uniformly.
"""
from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from .imageops import default_augment
from .oracle import predict_proba
from .policy import CandidateSet, expand
from .selection import kmeanspp_select

STRATEGIES = ("divaug", "random-select", "default-only", "identity")


def make_candidates(image: np.ndarray, streams: Sequence[np.random.Generator], partner_pool,
                    dataset_kind: str | None, source_index: int = 0) -> CandidateSet:
    """Sub-policy then (optionally) default augmentation, one stream per candidate."""
    post = None
    if dataset_kind is not None:
        def post(img, g):
            return default_augment(img, dataset_kind, g)
    return expand(image, len(streams), streams, partner_pool, source_index, post=post)


class Augmenter:
    def __init__(self, name: str, dataset_kind: str | None = "synthetic", E: int = 8):
        if name not in STRATEGIES:
            raise ValueError(f"unknown strategy {name!r}; choose from {', '.join(STRATEGIES)}")
        self.name = name
        self.dataset_kind = dataset_kind
        self.E = E

    def __repr__(self) -> str:
        return f"Augmenter({self.name!r}, dataset_kind={self.dataset_kind!r}, E={self.E})"

    def __call__(self, image: np.ndarray, k: int, rng: np.random.Generator, model=None,
                 partner_pool=None) -> list[np.ndarray]:
        if self.name == "identity":
            return [image.copy() for _ in range(k)]
        if self.name == "default-only":
            if self.dataset_kind is None:
                return [image.copy() for _ in range(k)]
            return [default_augment(image, self.dataset_kind, g) for g in rng.spawn(k)]
        if k > self.E:
            raise ValueError(f"cannot keep {k} of {self.E} candidates")
        pool = partner_pool if partner_pool is not None and len(partner_pool) else [image]
        cands = make_candidates(image, rng.spawn(self.E), pool, self.dataset_kind)
        if self.name == "random-select":
            keep = rng.choice(self.E, size=k, replace=False)
        else:
            if model is None:
                raise ValueError("the divaug strategy needs a model to score candidates")
            keep = kmeanspp_select(predict_proba(model, np.stack(cands.images)), k, rng).chosen_indices
        return [cands.images[i] for i in keep]

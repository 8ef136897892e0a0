"""Diversity, affinity and sub-policy statistics, plus metric writers."""
from __future__ import annotations

import csv
import json
import math
import zlib
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np

from . import rng as rngs
from .imageops import ALL_KINDS
from .oracle import accuracy, per_item_loss, predict_proba
from .selection import variance_diversity


@dataclass(frozen=True)
class MetricsRecord:
    epoch: int
    step: int
    metric: str
    value: float
    context: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"metric {self.metric} is not finite: {self.value}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def context_str(self) -> str:
        return ";".join(f"{k}={v}" for k, v in sorted(self.context.items()))


@dataclass(frozen=True)
class SubPolicyStats:
    epoch: int
    op_frequency: dict[str, float]
    mean_applied_p: float
    mean_m: float
    n_ops: int


# -- measurement protocol -----------------------------------------------------------


def _base_seed(rng) -> int:
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(2**63))
    return int(rng)


def _image_stream(base_seed: int, image: np.ndarray) -> np.random.Generator:
    # keyed on content, not position, so results do not depend on dataset order
    return rngs.stream(base_seed, rngs.MEASURE, zlib.crc32(image.tobytes()), image.size)


def _canonical_pool(images: np.ndarray) -> np.ndarray:
    keys = [zlib.crc32(im.tobytes()) for im in images]
    order = sorted(range(len(images)), key=lambda i: (keys[i], images[i].tobytes()))
    return images[order]


def _augment_all(model, images, augmenter, k, rng):
    images = np.asarray(images, dtype=np.uint8)
    if len(images) == 0:
        raise ValueError("empty dataset")
    base = _base_seed(rng)
    pool = _canonical_pool(images)
    for image in images:
        yield np.stack(augmenter(image, k, _image_stream(base, image), model, pool))


def dataset_variance_diversity(model, images, augmenter, k: int = 4, rng=0) -> float:
    """Mean over images of the Variance Diversity of ``k`` augmentations each."""
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    values = [variance_diversity(predict_proba(model, augs))
              for augs in _augment_all(model, images, augmenter, k, rng)]
    return math.fsum(values) / len(values)


def loss_diversity(model, images, labels) -> float:
    """Mean cross-entropy of the model over a (typically augmented) set."""
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise ValueError("loss diversity of an empty set")
    losses = per_item_loss(model, images, labels)
    if not np.all(np.isfinite(losses)):
        raise ValueError("zero probability assigned to a true label")
    return math.fsum(losses) / len(losses)


def dataset_loss_diversity(model, images, labels, augmenter, k: int = 4, rng=0) -> float:
    """Loss Diversity per image over its ``k`` augmentations, averaged over images."""
    labels = np.asarray(labels)
    values = [loss_diversity(model, augs, np.full(len(augs), y))
              for augs, y in zip(_augment_all(model, images, augmenter, k, rng), labels)]
    return math.fsum(values) / len(values)


def affinity(model, images, labels, augmenter, rng=0) -> float:
    """Accuracy on once-augmented validation images minus clean accuracy."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise ValueError("affinity of an empty validation set")
    augmented = np.concatenate(list(_augment_all(model, images, augmenter, 1, rng)))
    return accuracy(model, augmented, labels) - accuracy(model, images, labels)


# -- sub-policy statistics ------------------------------------------------------------


def record_subpolicy_stats(selections, epoch: int) -> SubPolicyStats:
    """Operation frequencies and mean p/m over the chosen sub-policies.

    ``selections`` is an iterable of ``(SubPolicy, chosen)`` pairs.
    """
    ops = [op for t, chosen in selections if chosen for op in t.ops]
    if not ops:
        raise ValueError("no chosen sub-policies to summarise")
    counts = Counter(op.kind for op in ops)
    n = len(ops)
    return SubPolicyStats(
        epoch=epoch,
        op_frequency={kind.value: counts.get(kind, 0) / n for kind in ALL_KINDS},
        mean_applied_p=math.fsum(op.p for op in ops) / n,
        mean_m=math.fsum(op.m for op in ops) / n,
        n_ops=n,
    )


# -- writers --------------------------------------------------------------------------


class MetricsWriter:
    """Single writer for ``metrics.jsonl`` and ``metrics.csv``."""

    def __init__(self, jsonl_path, csv_path):
        self._jsonl = open(jsonl_path, "w", newline="\n")
        self._csv_fh = open(csv_path, "w", newline="")
        self._csv = csv.writer(self._csv_fh, lineterminator="\n")
        self._csv.writerow(["epoch", "step", "metric", "value", "context"])
        self.records: list[MetricsRecord] = []

    def write(self, record: MetricsRecord) -> None:
        self.records.append(record)
        self._jsonl.write(record.to_json() + "\n")
        self._csv.writerow([record.epoch, record.step, record.metric, repr(float(record.value)),
                            record.context_str()])

    def close(self) -> None:
        self._jsonl.close()
        self._csv_fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def subpolicy_stats_header() -> list[str]:
    return ["epoch", *(k.value for k in ALL_KINDS), "mean_applied_p", "mean_m", "n_ops"]


def write_subpolicy_stats(path, stats: list[SubPolicyStats]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(subpolicy_stats_header())
        for s in stats:
            w.writerow([s.epoch, *(repr(s.op_frequency[k.value]) for k in ALL_KINDS),
                        repr(s.mean_applied_p), repr(s.mean_m), s.n_ops])


def read_metrics_jsonl(path) -> list[MetricsRecord]:
    with open(path) as fh:
        return [MetricsRecord(**json.loads(line)) for line in fh if line.strip()]
